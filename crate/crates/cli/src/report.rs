//! Stable CSV report rows.
//!
//! One row per verified quantity; the column set is fixed and the float
//! format carries 9 significant digits so reruns with the same seed and
//! worker count reproduce the estimate columns byte for byte.

use std::io::{self, Write};

use excloop::estimators::Verdict;

pub const HEADER: &str = "experiment,quantity,estimate,std_error,ci_lo,ci_hi,target,rel_err,\
                          verdict,n_samples,eps,dt,seed,wall_time_s";

#[derive(Debug, Clone)]
pub struct Row {
    pub experiment: String,
    pub quantity: String,
    pub estimate: f64,
    pub std_error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub target: f64,
    pub rel_err: f64,
    pub verdict: Verdict,
    pub n_samples: u64,
    pub eps: f64,
    pub dt: f64,
    pub seed: u64,
    pub wall_time_s: f64,
}

/// 9 significant digits: plain decimal in the human range, scientific
/// notation outside it, zero as a bare 0.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let ax = x.abs();
    if (1e-4..1e9).contains(&ax) {
        let exp = ax.log10().floor() as i32;
        let decimals = (8 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.8e}")
    }
}

impl Row {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.quantity,
            fmt_sig(self.estimate),
            fmt_sig(self.std_error),
            fmt_sig(self.ci_lo),
            fmt_sig(self.ci_hi),
            fmt_sig(self.target),
            fmt_sig(self.rel_err),
            self.verdict,
            self.n_samples,
            fmt_sig(self.eps),
            fmt_sig(self.dt),
            self.seed,
            fmt_sig(self.wall_time_s),
        )
    }
}

/// Writes the header and every row, newline-terminated.
pub fn emit_report(rows: &[Row], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "{HEADER}")?;
    for row in rows {
        writeln!(w, "{}", row.to_csv())?;
    }
    Ok(())
}

/// Exit code from the verdict set: any fail wins, then any underpowered.
pub fn exit_code(rows: &[Row]) -> i32 {
    if rows.iter().any(|r| r.verdict == Verdict::Fail) {
        2
    } else if rows.iter().any(|r| r.verdict == Verdict::Underpowered) {
        3
    } else {
        0
    }
}
