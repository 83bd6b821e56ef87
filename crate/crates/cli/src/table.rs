//! Versioned CSV tables, one per task.

use std::fmt::Write as _;

use crate::config::Task;

pub type Row = Vec<String>;

pub const SCHEMA_VERSION: u32 = 1;

pub fn header(task: Task) -> &'static [&'static str] {
    match task {
        Task::Energy => &[
            "config_hash", "toggles", "model", "n", "j2", "basis", "rdm_k",
            "e_sdp_per_spin", "e_exact_per_spin", "rel_gap", "e_sdp", "e_exact",
            "status", "census", "iterations",
        ],
        Task::Observable => &[
            "config_hash", "toggles", "model", "n", "j2", "basis", "observable",
            "lower", "target", "upper", "window_lower", "window_upper",
            "lower_status", "upper_status",
        ],
        Task::Anderson => &[
            "config_hash", "model", "n", "j2", "k", "bound", "bound_per_spin",
            "e_exact_per_spin",
        ],
        Task::Exact => &["config_hash", "model", "n", "j2", "quantity", "value"],
        Task::Export => &[
            "config_hash", "toggles", "model", "n", "j2", "basis", "file", "num_vars",
            "blocks", "sha256",
        ],
    }
}

/// Six decimals, without a negative zero.
pub fn fixed(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

/// Ten decimals.
pub fn full(x: f64) -> String {
    format!("{x:.10}")
}

fn escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// The full table text; the header is always present.
pub fn render(task: Task, rows: &[Row]) -> String {
    let mut out = String::new();
    let mut cols = vec!["schema"];
    cols.extend_from_slice(header(task));
    out.push_str(&cols.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header(task).len());
        let _ = write!(out, "{}.v{SCHEMA_VERSION}", task.name());
        for field in row {
            out.push(',');
            out.push_str(&escape(field));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_zero_is_printed_plain() {
        assert_eq!(fixed(-1e-9), "0.000000");
        assert_eq!(fixed(-0.4671289), "-0.467129");
    }

    #[test]
    fn fields_with_commas_are_quoted() {
        assert_eq!(escape("a,b"), "\"a,b\"");
        assert_eq!(escape("say \"x\""), "\"say \"\"x\"\"\"");
        assert_eq!(escape("C(1)"), "C(1)");
    }

    #[test]
    fn empty_table_has_header() {
        let t = render(Task::Anderson, &[]);
        assert_eq!(t.lines().count(), 1);
        assert!(t.starts_with("schema,config_hash"));
    }
}
