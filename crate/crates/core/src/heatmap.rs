//! CSV and SVG export of effect tables.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::interpret::{EffectEntry, EffectTable};

pub const CSV_HEADER: &str = "order,node,class,features,effect";
pub const CELL: usize = 24;
const LABEL: usize = 40;

pub fn to_csv(table: &EffectTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for e in &table.entries {
        let feats: Vec<String> = e.features.iter().map(usize::to_string).collect();
        // `{}` prints the shortest representation that parses back exactly.
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            table.order,
            table.node,
            table.class,
            feats.join("+"),
            e.effect
        );
    }
    out
}

/// Parses a single-table CSV produced by [`to_csv`].
pub fn parse_csv(text: &str) -> Result<EffectTable> {
    let bad =
        |line: usize, what: &str| Error::format("effects csv", format!("line {line}: {what}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(bad(1, "missing header")),
    }
    let mut header: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(bad(n, "expected 5 columns"));
        }
        let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(n, "bad integer"));
        let key = (num(cols[0])?, num(cols[1])?, num(cols[2])?);
        if *header.get_or_insert(key) != key {
            return Err(bad(n, "mixed order/node/class"));
        }
        let features = cols[3].split('+').map(num).collect::<Result<Vec<_>>>()?;
        if features.len() != key.0 {
            return Err(bad(n, "tuple arity differs from order"));
        }
        let effect = cols[4].trim().parse().map_err(|_| bad(n, "bad effect"))?;
        entries.push(EffectEntry { features, effect });
    }
    let (order, node, class) = header.ok_or_else(|| bad(2, "no entries"))?;
    Ok(EffectTable {
        node,
        class,
        order,
        entries,
    })
}

/// Cell colour: red for positive, blue for negative, white for zero, with
/// intensity `|v| / max_abs`.
pub fn cell_color(v: f64, max_abs: f64) -> String {
    if v == 0.0 || max_abs == 0.0 {
        return "#ffffff".into();
    }
    let t = (v.abs() / max_abs).min(1.0);
    let fade = (255.0 * (1.0 - t)).round() as u8;
    if v > 0.0 {
        format!("#ff{fade:02x}{fade:02x}")
    } else {
        format!("#{fade:02x}{fade:02x}ff")
    }
}

/// SVG grid: a 1-row strip for order 1, a feature × feature matrix for
/// order 2. Higher orders are CSV only.
pub fn to_svg(table: &EffectTable) -> Result<String> {
    if table.is_empty() {
        return Err(Error::InvalidArgument("empty effect table".into()));
    }
    let feats = table.features();
    let max_abs = table
        .entries
        .iter()
        .map(|e| e.effect.abs())
        .fold(0.0, f64::max);
    let pos = |f: usize| feats.iter().position(|&g| g == f).unwrap();
    let (rows, cells): (usize, Vec<(usize, usize, f64)>) = match table.order {
        1 => (
            1,
            table
                .entries
                .iter()
                .map(|e| (0, pos(e.features[0]), e.effect))
                .collect(),
        ),
        2 => (
            feats.len(),
            table
                .entries
                .iter()
                .map(|e| (pos(e.features[0]), pos(e.features[1]), e.effect))
                .collect(),
        ),
        o => {
            return Err(Error::InvalidArgument(format!(
                "order {o} tables have no SVG rendering; use CSV"
            )))
        }
    };
    let width = LABEL + feats.len() * CELL;
    let height = LABEL + rows * CELL;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="monospace" font-size="9">"#
    );
    let _ = writeln!(
        s,
        "<title>order {} effects, node {}, class {}</title>",
        table.order, table.node, table.class
    );
    for (c, f) in feats.iter().enumerate() {
        let x = LABEL + c * CELL + CELL / 2;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="middle">{f}</text>"#,
            LABEL - 6
        );
    }
    if table.order == 2 {
        for (r, f) in feats.iter().enumerate() {
            let y = LABEL + r * CELL + CELL / 2 + 3;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{y}" text-anchor="end">{f}</text>"#,
                LABEL - 4
            );
        }
    }
    for (r, c, v) in cells {
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}" stroke="#cccccc"><title>{v}</title></rect>"##,
            LABEL + c * CELL,
            LABEL + r * CELL,
            cell_color(v, max_abs)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
