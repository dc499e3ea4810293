//! CSV writers for plotting and downstream tooling. Undefined values are
//! written as empty cells.

use std::io::{self, Write};

use ndarray::Array2;

use crate::lsf::LsfGrid;
use crate::stationarity::{CollinearityMatrix, Extent};

fn cell(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

/// Square matrix with a header row of column indices.
pub fn write_collinearity_csv<W: Write>(matrix: &CollinearityMatrix, mut w: W) -> io::Result<()> {
    let k = matrix.len();
    let header: Vec<String> = (0..k).map(|j| j.to_string()).collect();
    writeln!(w, "index,{}", header.join(","))?;
    for (i, row) in matrix.values().rows().into_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|&v| cell(v)).collect();
        writeln!(w, "{i},{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_extents_csv<W: Write>(extents: &[Extent], mut w: W) -> io::Result<()> {
    writeln!(w, "index,extent,run_length,censored")?;
    for e in extents {
        writeln!(
            w,
            "{},{},{},{}",
            e.index,
            e.extent.map(cell).unwrap_or_default(),
            e.run_length,
            e.censored
        )?;
    }
    Ok(())
}

/// Long format: `k_t,doppler_bin,doppler_hz,power`.
pub fn write_doppler_profile_csv<W: Write>(
    profile: &Array2<f64>,
    doppler_axis: &[f64],
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "k_t,doppler_bin,doppler_hz,power")?;
    for ((k_t, p), v) in profile.indexed_iter() {
        writeln!(w, "{k_t},{p},{},{}", cell(doppler_axis[p]), cell(*v))?;
    }
    Ok(())
}

/// Index quadruplets: `k_t,k_f,doppler_bin,delay_bin,power`.
pub fn write_lsf_csv<W: Write>(grid: &LsfGrid, mut w: W) -> io::Result<()> {
    let plan = grid.plan();
    writeln!(w, "k_t,k_f,doppler_bin,delay_bin,power")?;
    for k_t in 0..plan.k_t_count {
        for k_f in 0..plan.k_f_count {
            for ((p, l), v) in grid.region(k_t, k_f).indexed_iter() {
                writeln!(w, "{k_t},{k_f},{p},{l},{}", cell(*v))?;
            }
        }
    }
    Ok(())
}
