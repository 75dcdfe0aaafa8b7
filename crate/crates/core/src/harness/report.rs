use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::HarnessError;
use crate::matching::{Counts, MatchKind};
use crate::metrics::MatchReport;
use crate::model::Layout;

/// A report with an optional run label such as `bivp/gt-boxes`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReportRow {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub report: MatchReport,
}

impl ReportRow {
    pub fn new(label: Option<String>, report: MatchReport) -> Self {
        Self { label, report }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Svg,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "svg" => Ok(ReportFormat::Svg),
            other => Err(format!("unknown report format '{other}'")),
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn labeled(rows: &[ReportRow]) -> bool {
    rows.iter().any(|r| r.label.is_some())
}

fn label(r: &ReportRow) -> &str {
    r.label.as_deref().unwrap_or("-")
}

/// `mode,precision,recall,f1` in percent, one decimal; a leading `run`
/// column appears when any row is labeled.
pub fn report_csv(rows: &[ReportRow]) -> String {
    let with_run = labeled(rows);
    let mut out = String::from(if with_run { "run,mode,precision,recall,f1\n" } else { "mode,precision,recall,f1\n" });
    for r in rows {
        if with_run {
            write!(out, "{},", label(r)).unwrap();
        }
        writeln!(out, "{},{},{},{}", r.report.mode, pct(r.report.precision), pct(r.report.recall), pct(r.report.f1)).unwrap();
    }
    out
}

fn layouts(rows: &[ReportRow]) -> Vec<Layout> {
    let mut v: Vec<Layout> = rows.iter().flat_map(|r| r.report.per_layout.keys().copied()).collect();
    v.sort();
    v.dedup();
    v
}

/// Per-layout counts and scores.
pub fn layout_csv(rows: &[ReportRow]) -> String {
    let with_run = labeled(rows);
    let mut out = String::from(if with_run { "run,mode,layout,tp,fp,fn,precision,recall,f1\n" } else { "mode,layout,tp,fp,fn,precision,recall,f1\n" });
    for r in rows {
        for (layout, c) in &r.report.per_layout {
            if with_run {
                write!(out, "{},", label(r)).unwrap();
            }
            writeln!(out, "{},{layout},{},{},{},{},{},{}", r.report.mode, c.tp, c.fp, c.fn_, pct(c.precision()), pct(c.recall()), pct(c.f1())).unwrap();
        }
    }
    out
}

/// Run × mode grid of P/R/F1, then F1 by layout.
pub fn report_markdown(rows: &[ReportRow]) -> String {
    let mut runs: Vec<&str> = Vec::new();
    let mut modes: Vec<MatchKind> = Vec::new();
    for r in rows {
        if !runs.contains(&label(r)) {
            runs.push(label(r));
        }
        if !modes.contains(&r.report.mode) {
            modes.push(r.report.mode);
        }
    }
    let cap = |m: MatchKind| {
        let s = m.as_str();
        s[..1].to_uppercase() + &s[1..]
    };
    let mut out = String::from("| Run |");
    for m in &modes {
        write!(out, " {0} P | {0} R | {0} F1 |", cap(*m)).unwrap();
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(3 * modes.len()));
    out.push('\n');
    for run in &runs {
        write!(out, "| {run} |").unwrap();
        for m in &modes {
            match rows.iter().find(|r| label(r) == *run && r.report.mode == *m) {
                Some(r) => write!(out, " {} | {} | {} |", pct(r.report.precision), pct(r.report.recall), pct(r.report.f1)).unwrap(),
                None => out.push_str(" - | - | - |"),
            }
        }
        out.push('\n');
    }
    let ls = layouts(rows);
    if !ls.is_empty() {
        out.push_str("\nF1 by layout:\n\n| Run | Mode |");
        for l in &ls {
            write!(out, " {l} |").unwrap();
        }
        out.push_str("\n|---|---|");
        out.push_str(&"---:|".repeat(ls.len()));
        out.push('\n');
        for r in rows {
            write!(out, "| {} | {} |", label(r), r.report.mode).unwrap();
            for l in &ls {
                match r.report.per_layout.get(l) {
                    Some(c) => write!(out, " {} |", pct(c.f1())).unwrap(),
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
    }
    out
}

const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1"];

/// Grouped bar chart of F1 per layout, one bar per row.
pub fn report_svg(rows: &[ReportRow]) -> String {
    let ls = layouts(rows);
    let (bar, gap, top, plot_h, left) = (18.0, 24.0, 30.0, 200.0, 40.0);
    let group_w = bar * rows.len().max(1) as f64 + gap;
    let legend_h = 16.0 * rows.len() as f64;
    let width = left + group_w * ls.len().max(1) as f64 + gap;
    let height = top + plot_h + 30.0 + legend_h + 10.0;
    let base = top + plot_h;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#).unwrap();
    writeln!(s, r#"<text x="{left:.0}" y="18">F1 (%) by layout</text>"#).unwrap();
    for tick in [0.0, 50.0, 100.0] {
        let y = base - plot_h * tick / 100.0;
        writeln!(s, r##"<line x1="{left:.0}" y1="{y:.1}" x2="{:.0}" y2="{y:.1}" stroke="#ddd"/><text x="{:.0}" y="{:.1}" text-anchor="end">{tick:.0}</text>"##, width - gap / 2.0, left - 4.0, y + 4.0).unwrap();
    }
    for (g, layout) in ls.iter().enumerate() {
        let x0 = left + gap / 2.0 + g as f64 * group_w;
        writeln!(s, r#"<g class="group" data-layout="{layout}">"#).unwrap();
        for (k, r) in rows.iter().enumerate() {
            let f1 = r.report.per_layout.get(layout).copied().unwrap_or(Counts::default());
            let v = if r.report.per_layout.contains_key(layout) { f1.f1() } else { 0.0 };
            let h = plot_h * v;
            writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{bar:.0}" height="{h:.1}" fill="{}"><title>{} {}: {}</title></rect>"#,
                x0 + k as f64 * bar,
                base - h,
                PALETTE[k % PALETTE.len()],
                xml_escape(label(r)),
                r.report.mode,
                pct(v)
            )
            .unwrap();
        }
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{layout}</text>"#, x0 + bar * rows.len() as f64 / 2.0, base + 16.0).unwrap();
        s.push_str("</g>\n");
    }
    for (k, r) in rows.iter().enumerate() {
        let y = base + 30.0 + 16.0 * k as f64;
        writeln!(s, r#"<rect x="{left:.0}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.0}" y="{:.1}">{} {}</text>"#, y, PALETTE[k % PALETTE.len()], left + 14.0, y + 9.0, xml_escape(label(r)), r.report.mode).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn write(path: PathBuf, content: String) -> Result<PathBuf, HarnessError> {
    fs::write(&path, content).map_err(|source| HarnessError::Write { path: path.clone(), source })?;
    Ok(path)
}

/// Writes `report.md`, `report.csv` + `report_layouts.csv` and/or
/// `report.svg` into `dir`. Output bytes depend only on `rows`.
pub fn emit_report(rows: &[ReportRow], dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Config("a report needs at least one result".into()));
    }
    fs::create_dir_all(dir).map_err(|source| HarnessError::Write { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    for f in formats {
        match f {
            ReportFormat::Markdown => written.push(write(dir.join("report.md"), report_markdown(rows))?),
            ReportFormat::Csv => {
                written.push(write(dir.join("report.csv"), report_csv(rows))?);
                written.push(write(dir.join("report_layouts.csv"), layout_csv(rows))?);
            }
            ReportFormat::Svg => written.push(write(dir.join("report.svg"), report_svg(rows))?),
        }
    }
    Ok(written)
}
