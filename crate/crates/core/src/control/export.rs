use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::ControlSignal;
use crate::error::Result;

use super::hum::GramianReport;

/// CSV of a control signal, one row per time sample. Compact mode writes
/// `t,f_l2,h_l2`; full mode adds `f_re_j,f_im_j,h_j` for every grid point.
pub fn write_signal_csv<W: Write>(signal: &ControlSignal, compact: bool, mut w: W) -> Result<()> {
    let n = signal.grid().len();
    write!(w, "t,f_l2,h_l2")?;
    if !compact {
        for j in 0..n {
            write!(w, ",f_re_{j},f_im_{j}")?;
        }
        for j in 0..n {
            write!(w, ",h_{j}")?;
        }
    }
    writeln!(w)?;
    for (k, (f, h)) in signal.f().iter().zip(signal.h()).enumerate() {
        let fl2 = (f.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64).sqrt();
        let hl2 = (h.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
        write!(w, "{:e},{:e},{:e}", k as f64 * signal.dt(), fl2, hl2)?;
        if !compact {
            for c in f {
                write!(w, ",{:e},{:e}", c.re, c.im)?;
            }
            for x in h {
                write!(w, ",{x:e}")?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// JSON metadata accompanying an exported control.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlMeta {
    pub n: usize,
    pub horizon: f64,
    pub dt: f64,
    pub control_l2: f64,
    pub terminal_residual: f64,
    pub gramian: Option<GramianReport>,
    pub fixed_point_iterations: Option<usize>,
    pub fixed_point_differences: Vec<f64>,
}

impl ControlMeta {
    pub fn new(signal: &ControlSignal, terminal_residual: f64) -> Self {
        Self {
            n: signal.grid().len(),
            horizon: signal.horizon(),
            dt: signal.dt(),
            control_l2: signal.l2_norm(),
            terminal_residual,
            gramian: None,
            fixed_point_iterations: None,
            fixed_point_differences: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TorusGrid;

    #[test]
    fn csv_shapes() {
        let g = TorusGrid::new(4).unwrap();
        let s = ControlSignal::zeros(&g, 0.5, 2);
        let mut buf = Vec::new();
        write_signal_csv(&s, true, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        let mut buf = Vec::new();
        write_signal_csv(&s, false, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap().split(',').count(), 3 + 3 * 4);
    }
}
