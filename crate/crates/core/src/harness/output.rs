//! Result emission: plot-ready CSV and the structured-text config echo.

use std::io::Write;

use super::ExperimentResult;
use crate::error::Result;

/// Formats `x` with at least six significant digits, always with a dot as
/// decimal separator.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..15).contains(&mag) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Writes one CSV row per (cell, test, level):
/// `experiment,<cell parameters>,test,alpha,freq,se,M,seed,degenerate,reference`.
///
/// `freq` is the rejection frequency among the `M - degenerate` replicates
/// for which the statistic could be computed; `reference` is the asymptotic
/// prediction for that cell, when one exists.
pub fn write_csv(result: &ExperimentResult, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| crate::Error::Io(std::io::Error::other(e));
    let mut header: Vec<String> = vec!["experiment".into()];
    header.extend(result.param_names.iter().map(|s| s.to_string()));
    header.extend(
        ["test", "alpha", "freq", "se", "M", "seed", "degenerate", "reference"]
            .iter()
            .map(|s| s.to_string()),
    );
    out.write_record(&header).map_err(io)?;
    for row in &result.rows {
        let mut rec: Vec<String> = vec![result.config.kind.name().into()];
        rec.extend(row.params.iter().cloned());
        rec.push(row.test.clone());
        rec.push(format_number(row.alpha));
        rec.push(format_number(row.freq()));
        rec.push(format_number(row.se()));
        rec.push(row.m.to_string());
        rec.push(result.config.seed.to_string());
        rec.push(row.degenerate.to_string());
        rec.push(row.reference.map(format_number).unwrap_or_default());
        out.write_record(&rec).map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

/// The resolved configuration followed by run metadata as comments. Feeding
/// the document back through the config parser reproduces the run.
pub fn echo_text(result: &ExperimentResult) -> String {
    let mut s = result.config.to_text();
    s.push_str(&format!(
        "# wall_time_seconds = {}\n# rows = {}\n",
        format_number(result.wall_time.as_secs_f64()),
        result.rows.len()
    ));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_number(0.05), "0.0500000");
        assert_eq!(format_number(0.327), "0.327000");
        assert_eq!(format_number(16.918977), "16.9190");
        assert_eq!(format_number(123456789.0), "123456789");
        assert_eq!(format_number(0.0), "0.00000");
        assert_eq!(format_number(1.5e-7), "1.50000e-7");
        assert_eq!(format_number(-2.5), "-2.50000");
    }
}
