//! CSV emission for simulation results.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::sim::SimulationResult;

/// Formats with 9 significant digits: fixed notation for moderate
/// magnitudes, scientific otherwise.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        trim_fraction(&fixed)
    } else {
        format!("{}e{exp}", trim_fraction(mantissa))
    }
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn write_timeseries<W: Write>(w: &mut W, result: &SimulationResult) -> io::Result<()> {
    let n = result.n_loops;
    let mut header = vec!["time_s".to_string()];
    for i in 1..=n {
        header.extend([
            format!("r_{i}"),
            format!("y_{i}"),
            format!("u_{i}"),
            format!("h_{i}_ms"),
            format!("prio_{i}"),
        ]);
    }
    writeln!(w, "{}", header.join(","))?;
    for row in &result.timeseries {
        let mut fields = vec![fmt_sig9(row.time.as_secs_f64())];
        for l in &row.loops {
            fields.push(fmt_sig9(l.r));
            fields.push(fmt_sig9(l.y));
            fields.push(fmt_sig9(l.u));
            fields.push(fmt_sig9(l.h.as_secs_f64() * 1e3));
            fields.push(l.priority.display_rank(n).to_string());
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn write_scheduler<W: Write>(w: &mut W, result: &SimulationResult) -> io::Result<()> {
    let n = result.n_loops;
    let mut header: Vec<String> = ["time_s", "miss_ratio", "err", "U_total"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 1..=n {
        header.extend([
            format!("J_{i}"),
            format!("Jp_{i}"),
            format!("h_{i}_ms"),
            format!("prio_{i}"),
        ]);
    }
    writeln!(w, "{}", header.join(","))?;
    for row in &result.scheduler_trace {
        let mut fields = vec![
            fmt_sig9(row.time.as_secs_f64()),
            fmt_sig9(row.miss_ratio),
            fmt_sig9(row.err),
            fmt_sig9(row.u_total),
        ];
        for i in 0..n {
            fields.push(fmt_sig9(row.j[i]));
            fields.push(fmt_sig9(row.jp[i]));
            fields.push(fmt_sig9(row.h[i] * 1e3));
            fields.push(row.prio[i].display_rank(n).to_string());
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Long-format summary: `metric,loop,value`.
pub fn write_summary<W: Write>(w: &mut W, result: &SimulationResult) -> io::Result<()> {
    let s = &result.summary;
    writeln!(w, "metric,loop,value")?;
    for (i, m) in s.metrics.loops.iter().enumerate() {
        let id = i + 1;
        writeln!(w, "iae,{id},{}", fmt_sig9(m.iae))?;
        writeln!(w, "generated,{id},{}", m.generated)?;
        writeln!(w, "delivered,{id},{}", m.delivered)?;
        writeln!(w, "dropped,{id},{}", m.dropped)?;
        writeln!(w, "late,{id},{}", m.late)?;
    }
    writeln!(w, "iae_total,,{}", fmt_sig9(s.total_iae()))?;
    writeln!(
        w,
        "mean_requested_utilization_final_half,,{}",
        fmt_sig9(s.mean_utilization_final_half)
    )?;
    writeln!(w, "miss_ratio_run,,{}", fmt_sig9(s.run_miss_ratio))?;
    writeln!(
        w,
        "miss_ratio_final_window,,{}",
        fmt_sig9(s.final_window_miss_ratio)
    )?;
    writeln!(w, "bus_busy_fraction,,{}", fmt_sig9(s.bus_busy_fraction))?;
    Ok(())
}

/// Writes `timeseries.csv`, `scheduler.csv` and `summary.csv` into `dir`,
/// creating it if needed.
pub fn write_run_dir(dir: &Path, result: &SimulationResult) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    type Writer = fn(&mut BufWriter<File>, &SimulationResult) -> io::Result<()>;
    let files: [(&str, Writer); 3] = [
        ("timeseries.csv", write_timeseries),
        ("scheduler.csv", write_scheduler),
        ("summary.csv", write_summary),
    ];
    for (name, write) in files {
        let mut w = BufWriter::new(File::create(dir.join(name))?);
        write(&mut w, result)?;
        w.flush()?;
    }
    Ok(())
}
