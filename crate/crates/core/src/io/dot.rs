use std::fmt::Write as _;

use crate::attack::{AttackDltts, Switch};
use crate::dltts::{Dltts, DELTA};
use crate::scalar::Scalar;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Whole probabilities print as integers.
fn prob_text<S: Scalar>(p: &S) -> String {
    match p.to_rational() {
        Some(q) if q.is_integer() => q.to_integer().to_string(),
        _ => p.render(),
    }
}

fn edge_label<S: Scalar>(action: &str, label: &crate::dltts::Label, prob: &S) -> String {
    if action == DELTA {
        return format!("{DELTA} : {}", prob_text(prob));
    }
    let text = label.to_string();
    let mut out = if text.is_empty() {
        prob_text(prob)
    } else {
        format!("{text} / {}", prob_text(prob))
    };
    if let Some(p) = &label.provenance {
        let _ = write!(out, " ({p})");
    }
    out
}

fn render<S: Scalar>(d: &Dltts<S>, off: impl Fn(&str) -> bool) -> String {
    let stop_used = d
        .transitions()
        .iter()
        .any(|t| t.branches.iter().any(|b| b.to == d.stop()));
    let mut out = String::from("digraph dltts {\n  rankdir=LR;\n  node [shape=circle];\n");
    for s in d.states() {
        if s == d.stop() && !stop_used {
            continue;
        }
        let shape = if s == d.stop() { " shape=doublecircle" } else { "" };
        let _ = writeln!(out, "  {} [label={}{shape}];", quote(s), quote(s));
    }
    for t in d.transitions() {
        let dashed = t.is_response() && off(&t.from);
        for b in &t.branches {
            let mut label = edge_label(&t.action, &b.label, &b.prob);
            let style = if dashed {
                label.push_str(" [OFF]");
                " style=dashed"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "  {} -> {} [label={}{style}];",
                quote(&t.from),
                quote(&b.to),
                quote(&label)
            );
        }
    }
    out.push_str("}\n");
    out
}

/// Graphviz text for a system: states in declaration order, the stop state
/// (when reachable) as a double circle, edges labeled `label / probability`.
pub fn export_dot<S: Scalar>(d: &Dltts<S>) -> String {
    render(d, |_| false)
}

/// As [`export_dot`], drawing switched-off responses dashed.
pub fn export_attack_dot<S: Scalar>(a: &AttackDltts<S>) -> String {
    render(&a.dltts, |state| {
        a.switches
            .iter()
            .any(|((s, _), sw)| s == state && *sw == Switch::Off)
    })
}
