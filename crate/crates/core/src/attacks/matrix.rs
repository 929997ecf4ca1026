//! Variant x attack outcome table.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{
    impersonation_attack, malleability_attack, sample_distinct_pair, session_swap_attack, AttackConfig,
    ZChoice,
};
use crate::error::Result;
use crate::group::GroupParams;
use crate::protocol::{ConfirmationMethod, Variant};
use crate::simnet::{run_honest_exchange, ExchangeConfig};

/// Column order of the rendered table.
pub const COLUMNS: [&str; 11] = [
    "RND", "RND-E", "IKA", "EKA", "WA", "SA", "IMP", "SS", "PFS", "UKS", "MAL",
];

/// Seeds per attack cell; a cell is marked resistant only if every run fails.
pub const RUNS_PER_CELL: u64 = 3;

pub const RESISTS: &str = "✓";
pub const VULNERABLE: &str = "×";
pub const FORMAL_ONLY: &str = "n/a";
pub const NOT_APPLICABLE: &str = "-";

/// One row. `true` means the variant resists the attack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixRow {
    pub variant: Variant,
    pub confirm: ConfirmationMethod,
    pub rnd: u32,
    /// Rounds with explicit confirmation; `None` for the implicit rows.
    pub rnd_e: Option<u32>,
    pub eka: Option<bool>,
    pub imp: bool,
    pub ss: bool,
    pub uks: bool,
    pub mal: bool,
}

impl MatrixRow {
    pub fn key(&self) -> String {
        format!("{}/{}", self.variant, self.confirm)
    }

    /// Cell values in [`COLUMNS`] order.
    pub fn cells(&self) -> Vec<String> {
        let mark = |b: bool| if b { RESISTS } else { VULNERABLE }.to_owned();
        vec![
            self.rnd.to_string(),
            self.rnd_e.map_or_else(|| NOT_APPLICABLE.to_owned(), |r| r.to_string()),
            FORMAL_ONLY.to_owned(),
            self.eka.map_or_else(|| NOT_APPLICABLE.to_owned(), mark),
            FORMAL_ONLY.to_owned(),
            FORMAL_ONLY.to_owned(),
            mark(self.imp),
            mark(self.ss),
            FORMAL_ONLY.to_owned(),
            mark(self.uks),
            mark(self.mal),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecurityMatrix {
    pub rows: Vec<MatrixRow>,
}

const KEY_WIDTH: usize = 40;
const CELL_WIDTH: usize = 6;

fn pad(s: &str, width: usize) -> String {
    let n = s.chars().count();
    format!("{s}{}", " ".repeat(width.saturating_sub(n)))
}

impl SecurityMatrix {
    /// Aligned plain text. `n/a` marks properties only a formal model can
    /// check; `-` marks cells without explicit confirmation.
    pub fn to_text(&self) -> String {
        let mut out = pad("variant/confirm", KEY_WIDTH);
        for c in COLUMNS {
            out.push_str(&pad(c, CELL_WIDTH));
        }
        let mut out = out.trim_end().to_owned();
        out.push('\n');
        for row in &self.rows {
            let mut line = pad(&row.key(), KEY_WIDTH);
            for c in row.cells() {
                line.push_str(&pad(&c, CELL_WIDTH));
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }

    /// One `row=... COL=value ...` record per row.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let _ = write!(out, "row={}", row.key());
            for (c, v) in COLUMNS.iter().zip(row.cells()) {
                let _ = write!(out, " {c}={v}");
            }
            out.push('\n');
        }
        out
    }
}

fn cell_rng(seed: u64, row: usize, col: u64, run: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((row as u64) << 32 | col << 16 | run);
    rng
}

fn row_for(params: &Arc<GroupParams>, seed: u64, idx: usize, variant: Variant, confirm: ConfirmationMethod) -> Result<MatrixRow> {
    let explicit = confirm.is_explicit();
    let honest = |m: ConfirmationMethod, col: u64| -> Result<Option<u32>> {
        let mut rng = cell_rng(seed, idx, col, 0);
        let (x, y) = sample_distinct_pair(&mut rng, params);
        let cfg = ExchangeConfig::new(variant, Arc::clone(params), b"correct horse")
            .with_confirm(m)
            .with_scalars(x, y);
        Ok(run_honest_exchange(&cfg, &mut rng).ok().map(|r| r.rounds))
    };
    let rnd = honest(ConfirmationMethod::None, 0)?.unwrap_or(0);
    let rnd_e = if explicit { honest(confirm, 1)? } else { None };

    let base = AttackConfig::new(variant, Arc::clone(params)).with_confirm(confirm);
    let mut imp_hit = false;
    let mut uks_hit = false;
    let mut ss_hit = false;
    let mut mal_hit = false;
    for run in 0..RUNS_PER_CELL {
        let imp = impersonation_attack(&base, ZChoice::Adaptive, &mut cell_rng(seed, idx, 2, run))?;
        imp_hit |= imp.success;
        uks_hit |= imp.unknown_key_share;
        ss_hit |= session_swap_attack(&base, &mut cell_rng(seed, idx, 3, run))?.success;
        mal_hit |= malleability_attack(&base, None, &mut cell_rng(seed, idx, 4, run))?.success;
    }
    let eka = explicit.then(|| rnd_e.is_some() && !imp_hit && !uks_hit);
    Ok(MatrixRow {
        variant,
        confirm,
        rnd,
        rnd_e,
        eka,
        imp: !imp_hit,
        ss: !ss_hit,
        uks: !uks_hit,
        mal: !mal_hit,
    })
}

/// Runs every attack against each variant with its preset confirmation
/// method, then again with implicit confirmation only.
pub fn security_matrix(params: &Arc<GroupParams>, seed: u64) -> Result<SecurityMatrix> {
    let mut plan: Vec<(Variant, ConfirmationMethod)> =
        Variant::ALL.iter().map(|&v| (v, v.preset_confirmation())).collect();
    plan.extend(Variant::ALL.iter().map(|&v| (v, ConfirmationMethod::None)));
    let mut rows = Vec::with_capacity(plan.len());
    for (idx, (v, m)) in plan.into_iter().enumerate() {
        rows.push(row_for(params, seed, idx, v, m)?);
    }
    Ok(SecurityMatrix { rows })
}

/// A single differing cell between two rendered tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellDiff {
    pub row: String,
    pub column: String,
    pub expected: String,
    pub actual: String,
}

impl std::fmt::Display for CellDiff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "row {} column {}: expected {}, got {}",
            self.row, self.column, self.expected, self.actual
        )
    }
}

fn parse_table(text: &str) -> Vec<(String, Vec<(String, String)>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .map(|h| h.split_whitespace().skip(1).collect())
        .unwrap_or_default();
    lines
        .map(|l| {
            let mut toks = l.split_whitespace();
            let key = toks.next().unwrap_or_default().to_owned();
            let mut cells: Vec<(String, String)> = Vec::new();
            for (i, v) in toks.enumerate() {
                let col = header.get(i).map_or_else(|| format!("#{}", i + 1), |c| (*c).to_owned());
                cells.push((col, v.to_owned()));
            }
            (key, cells)
        })
        .collect()
}

/// Cell-level differences between an expected and an actual text table.
/// Rows present on only one side are reported with `<missing>`.
pub fn diff_tables(expected: &str, actual: &str) -> Vec<CellDiff> {
    let exp = parse_table(expected);
    let act = parse_table(actual);
    let mut diffs = Vec::new();
    let missing = "<missing>".to_owned();
    for (key, cells) in &exp {
        let other = act.iter().find(|(k, _)| k == key).map(|(_, c)| c);
        for (col, v) in cells {
            let got = other
                .and_then(|c| c.iter().find(|(cc, _)| cc == col))
                .map_or(&missing, |(_, v)| v);
            if got != v {
                diffs.push(CellDiff {
                    row: key.clone(),
                    column: col.clone(),
                    expected: v.clone(),
                    actual: got.clone(),
                });
            }
        }
    }
    for (key, cells) in &act {
        if !exp.iter().any(|(k, _)| k == key) {
            for (col, v) in cells {
                diffs.push(CellDiff {
                    row: key.clone(),
                    column: col.clone(),
                    expected: missing.clone(),
                    actual: v.clone(),
                });
            }
        }
    }
    diffs
}

/// The bundled expectation for [`SecurityMatrix::to_text`].
pub const GOLDEN_TEXT: &str = include_str!("../../golden/matrix.txt");
/// The bundled expectation for [`SecurityMatrix::to_kv`].
pub const GOLDEN_KV: &str = include_str!("../../golden/matrix.kv");
