//! Draw and diagnostic serialization: per-chain CSV matrices and a JSON
//! diagnostics document.

use std::io::{self, Write};

use super::{Diagnostics, MultiChainDraws};

/// Writes one chain's post-warmup draws as CSV: header row of parameter
/// names, one row per draw. Floats are rendered with the shortest
/// round-trippable representation, so re-parsing reproduces the draws
/// exactly.
pub fn write_draws_csv<W: Write>(
    out: &mut W,
    draws: &MultiChainDraws,
    chain: usize,
) -> io::Result<()> {
    let mut header = String::new();
    for (i, name) in draws.param_names.iter().enumerate() {
        if i > 0 {
            header.push(',');
        }
        header.push_str(name);
    }
    writeln!(out, "{header}")?;
    let run = &draws.chains[chain];
    let mut line = String::new();
    for d in 0..run.n_draws {
        line.clear();
        for p in 0..draws.dim {
            if p > 0 {
                line.push(',');
            }
            let value = run.draws[d * draws.dim + p];
            line.push_str(&format!("{value}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Diagnostics as a JSON document: per-parameter rhat/ess, total divergence
/// count, and each chain's adapted step size. Non-finite statistics (the NaN
/// sentinel for zero-variance parameters) serialize as null.
pub fn diagnostics_to_json(diagnostics: &Diagnostics) -> serde_json::Value {
    serde_json::to_value(diagnostics).expect("diagnostics serialize")
}
