use std::collections::BTreeSet;

use super::{ColumnClass, ColumnGroup, ColumnSchema, SchemaError, Signature, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    pub line_id: String,
    pub cells: Vec<Value>,
}

/// A table over a sub-schema of the signature.
#[derive(Clone, Debug, PartialEq)]
pub struct DataTable {
    name: String,
    schema: Vec<ColumnSchema>,
    rows: Vec<Row>,
    line_column: Option<String>,
}

impl DataTable {
    pub fn new(
        name: impl Into<String>,
        schema: Vec<ColumnSchema>,
        rows: Vec<Row>,
    ) -> Result<Self, SchemaError> {
        let mut seen = BTreeSet::new();
        for row in &rows {
            if !seen.insert(row.line_id.as_str()) {
                return Err(SchemaError::DuplicateLine(row.line_id.clone()));
            }
            if row.cells.len() != schema.len() {
                return Err(SchemaError::Arity {
                    line: row.line_id.clone(),
                    expected: schema.len(),
                    found: row.cells.len(),
                });
            }
            for (col, v) in schema.iter().zip(&row.cells) {
                if !v.fits(col.class) {
                    return Err(SchemaError::ClassMismatch {
                        column: col.name.clone(),
                        value: v.to_string(),
                    });
                }
            }
        }
        Ok(DataTable {
            name: name.into(),
            schema,
            rows,
            line_column: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn line_column(&self) -> Option<&str> {
        self.line_column.as_deref()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    pub fn row(&self, line_id: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.line_id == line_id)
    }

    /// Typed view of a row.
    pub fn tuple(&self, row: &Row) -> Tuple {
        Tuple::new(self.schema.clone(), row.cells.clone())
    }

    /// Typed view restricted to quasi-identifier and sensitive columns.
    pub fn public_tuple(&self, row: &Row) -> Tuple {
        let (columns, values) = self
            .schema
            .iter()
            .zip(&row.cells)
            .filter(|(c, _)| c.group != ColumnGroup::Identifier)
            .map(|(c, v)| (c.clone(), v.clone()))
            .unzip();
        Tuple::new(columns, values)
    }

    pub fn tuple_by_line(&self, line_id: &str) -> Option<Tuple> {
        self.row(line_id).map(|r| self.tuple(r))
    }

    /// CSV text that [`load_table`] reads back to identical cells.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let line_header = self.line_column.clone().unwrap_or_else(|| "line".into());
        let mut header = vec![line_header];
        header.extend(self.schema.iter().map(|c| c.name.clone()));
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec = vec![row.line_id.clone()];
            rec.extend(row.cells.iter().map(Value::to_string));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 input")
    }
}

/// Parses CSV `text` whose header names columns of `sig`.
///
/// When `line_column` names a header, that column supplies line ids;
/// otherwise rows are numbered `l1, l2, ...`.
pub fn load_table(
    name: &str,
    text: &str,
    sig: &Signature,
    line_column: Option<&str>,
) -> Result<DataTable, SchemaError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| SchemaError::Csv(e.to_string()))?
        .clone();
    let mut line_pos = None;
    let mut schema = Vec::new();
    let mut positions = Vec::new();
    for (pos, h) in header.iter().enumerate() {
        if Some(h) == line_column {
            line_pos = Some(pos);
            continue;
        }
        let col = sig
            .column(h)
            .ok_or_else(|| SchemaError::UnknownColumn(h.to_string()))?;
        if schema.iter().any(|c: &ColumnSchema| c.name == h) {
            return Err(SchemaError::DuplicateColumn(h.to_string()));
        }
        schema.push(col.clone());
        positions.push(pos);
    }
    if let Some(lc) = line_column {
        if line_pos.is_none() {
            return Err(SchemaError::UnknownColumn(lc.to_string()));
        }
    }
    if schema.is_empty() {
        return Err(SchemaError::EmptySchema);
    }

    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths {
                expected_len, len, ..
            } => SchemaError::Arity {
                line: format!("row {}", n + 1),
                expected: *expected_len as usize,
                found: *len as usize,
            },
            _ => SchemaError::Csv(e.to_string()),
        })?;
        let line_id = match line_pos {
            Some(p) => record[p].to_string(),
            None => format!("l{}", n + 1),
        };
        let cells = schema
            .iter()
            .zip(&positions)
            .map(|(col, &p)| Value::parse_cell(&record[p], col, sig.taxonomies()))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Row { line_id, cells });
    }
    let mut table = DataTable::new(name, schema, rows)?;
    table.line_column = line_column.map(str::to_string);
    Ok(table)
}

/// A typed tuple: values with the columns they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Tuple {
    pub columns: Vec<ColumnSchema>,
    pub values: Vec<Value>,
}

impl Tuple {
    pub fn new(columns: Vec<ColumnSchema>, values: Vec<Value>) -> Self {
        assert_eq!(columns.len(), values.len(), "tuple columns/values length");
        Tuple { columns, values }
    }

    /// Tuple whose columns are inferred from the values themselves
    /// (anonymous names `_0`, `_1`, ...).
    pub fn untyped(values: Vec<Value>) -> Self {
        let columns = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let col = ColumnSchema::new(format!("_{i}"), v.class(), ColumnGroup::QuasiIdentifier);
                match v.class() {
                    ColumnClass::Taxoral => col.with_taxonomy("_"),
                    _ => col,
                }
            })
            .collect();
        Tuple { columns, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures;

    #[test]
    fn published_row_parses() {
        let (sig, _) = fixtures::signature();
        let t = fixtures::published(&sig);
        let l4 = t.row("l4").unwrap();
        assert_eq!(
            l4.cells,
            vec![
                Value::interval(50, 60).unwrap(),
                Value::atom("M"),
                Value::atom("Maths"),
                Value::taxon("Viral-Infection"),
            ]
        );
        assert_eq!(t.schema().len(), 4);
    }

    #[test]
    fn secret_age_is_point_interval() {
        let (sig, _) = fixtures::signature();
        let t = fixtures::secret(&sig);
        assert_eq!(t.rows()[0].line_id, "l1");
        assert_eq!(t.rows()[0].cells[1], Value::IntInterval { lo: 24, hi: 24 });
    }

    #[test]
    fn errors() {
        let (sig, _) = fixtures::signature();
        let arity = "Age,Gender\n[1-2],M,extra\n";
        assert!(matches!(
            load_table("t", arity, &sig, None),
            Err(SchemaError::Arity { .. })
        ));
        let bad_taxon = "Ailment\nMeasles\n";
        assert!(matches!(
            load_table("t", bad_taxon, &sig, None),
            Err(SchemaError::UnknownTaxon { .. })
        ));
        let dup = "Line,Gender\nl1,M\nl1,F\n";
        assert!(matches!(
            load_table("t", dup, &sig, Some("Line")),
            Err(SchemaError::DuplicateLine(_))
        ));
        let unknown = "Height\n3\n";
        assert!(matches!(
            load_table("t", unknown, &sig, None),
            Err(SchemaError::UnknownColumn(_))
        ));
        let bad_cell = "Age\n[a-b]\n";
        assert!(matches!(
            load_table("t", bad_cell, &sig, None),
            Err(SchemaError::BadCell { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let (sig, _) = fixtures::signature();
        for t in [fixtures::published(&sig), fixtures::secret(&sig)] {
            let again = load_table(t.name(), &t.to_csv(), &sig, Some(t.line_column().unwrap_or("line")))
                .unwrap();
            assert_eq!(again.rows(), t.rows());
        }
    }
}
