//! Human-facing number formatting and trace/summary serialization.
//!
//! Printed reports round to 6 significant digits; the JSON sidecars keep
//! full f64 round-trip precision for exact regression comparisons.

use std::io::Write;

use crate::error::Result;
use crate::simulator::{SimTrace, Summary};

/// Formats with 6 significant digits, like printf's `%.6g`.
pub fn sig6(x: f64) -> String {
    sig(x, 6)
}

pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits.saturating_sub(1), x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}", trim_decimal(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_decimal(&format!("{:.*}", decimals, x))
    }
}

fn trim_decimal(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Writes the per-agent trace: one row per sample and agent.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &SimTrace) -> Result<()> {
    writeln!(w, "t,agent,x,y,q,mode,b,I")?;
    for (k, t) in trace.times.iter().enumerate() {
        for (i, s) in trace.agents[k].iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                sig6(*t),
                i,
                sig6(s.position.x),
                sig6(s.position.y),
                sig6(s.soc),
                s.mode.as_str(),
                s.sensing as u8,
                s.charging as u8
            )?;
        }
    }
    Ok(())
}

/// Writes the coverage time series.
pub fn write_coverage_csv<W: Write>(mut w: W, trace: &SimTrace) -> Result<()> {
    writeln!(w, "t,H")?;
    for (t, h) in trace.times.iter().zip(trace.h_series.iter()) {
        writeln!(w, "{},{}", sig6(*t), sig6(*h))?;
    }
    Ok(())
}

pub fn write_summary_text<W: Write>(mut w: W, label: &str, s: &Summary) -> Result<()> {
    writeln!(w, "controller: {label}")?;
    writeln!(w, "time_avg_H: {}", sig6(s.time_avg_h))?;
    writeln!(w, "min_H: {}", sig6(s.min_h))?;
    writeln!(w, "max_H: {}", sig6(s.max_h))?;
    writeln!(w, "battery_deaths: {}", s.battery_deaths)?;
    writeln!(w, "outlet_conflicts: {}", s.outlet_conflicts)?;
    writeln!(
        w,
        "per_agent_min_soc: [{}]",
        s.per_agent_min_soc.iter().map(|q| sig6(*q)).collect::<Vec<_>>().join(", ")
    )?;
    writeln!(w, "sensing_off_intervals: {}", s.sensing_off_intervals)?;
    writeln!(w, "sensing_off_time: {}", sig6(s.sensing_off_time))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_fixed_and_scientific() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(105.26315789), "105.263");
        assert_eq!(sig6(1321.1887), "1321.19");
        assert_eq!(sig6(0.0005), "0.0005");
        assert_eq!(sig6(76026.542), "76026.5");
        assert_eq!(sig6(123456.78), "123457");
        assert_eq!(sig6(1234567.8), "1.23457e6");
        assert_eq!(sig6(0.000012345678), "1.23457e-5");
        assert_eq!(sig6(-3.5), "-3.5");
    }

    #[test]
    fn sig6_rounding_can_change_magnitude() {
        assert_eq!(sig6(999999.7), "1e6");
        assert_eq!(sig6(0.99999997), "1");
    }
}
