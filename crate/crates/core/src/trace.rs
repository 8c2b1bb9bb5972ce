//! Per-round records and their CSV form.

use std::fmt::Write as _;

use crate::protocol::{Context, Instruction, Response};
use crate::{Error, Result};

pub const CSV_HEADER: &str =
    "round,context,instruction,response,hindsight,reward,instant_regret,cum_regret";

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub context: Context,
    pub instruction: Instruction,
    pub response: Response,
    pub hindsight: Instruction,
    /// `P(instruction | response, context)`.
    pub hidden_reward: f64,
    pub instant_regret: f64,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretTrace {
    records: Vec<RoundRecord>,
}

impl RegretTrace {
    pub fn new(records: Vec<RoundRecord>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }

    /// Cumulative regret per round, rounded exactly as written to CSV.
    pub fn persisted_cumulative(&self) -> Vec<f64> {
        self.records.iter().map(|r| persisted(r.cum_regret)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.round,
                r.context.0,
                r.instruction.0,
                r.response.0,
                r.hindsight.0,
                format_sig12(r.hidden_reward),
                format_sig12(r.instant_regret),
                format_sig12(r.cum_regret),
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            other => {
                return Err(Error::Parse(format!("unexpected trace header {other:?}")));
            }
        }
        let mut records = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(Error::Parse(format!("line {}: expected 8 fields", n + 2)));
            }
            let int = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", n + 2)))
            };
            let real = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", n + 2)))
            };
            records.push(RoundRecord {
                round: int(f[0])?,
                context: Context(int(f[1])?),
                instruction: Instruction(int(f[2])?),
                response: Response(int(f[3])?),
                hindsight: Instruction(int(f[4])?),
                hidden_reward: real(f[5])?,
                instant_regret: real(f[6])?,
                cum_regret: real(f[7])?,
            });
        }
        Ok(Self { records })
    }
}

/// Formats with 12 significant digits, `%.12g` style: trailing zeros
/// trimmed, scientific notation outside `1e-4 <= |v| < 1e12`.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        format!("{}e{exp}", trim_fraction(mantissa))
    } else {
        trim_fraction(&format!("{v:.*}", (11 - exp) as usize)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// The value a reader of the CSV recovers.
pub fn persisted(v: f64) -> f64 {
    format_sig12(v).parse().expect("formatted float parses")
}
