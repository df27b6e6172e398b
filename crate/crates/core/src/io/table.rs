use std::io::Write;

use crate::error::Result;
use crate::net::TrainLogRecord;
use crate::unwrap::ConvergenceRecord;

/// Float text with 17 significant digits; non-finite values as
/// `inf`, `-inf` or `nan`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_convergence_csv<W: Write>(log: &[ConvergenceRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["iteration", "dc1", "dc2", "total"])?;
    for r in log {
        out.write_record([r.iteration.to_string(), fmt_f64(r.dc1), fmt_f64(r.dc2), fmt_f64(r.total)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_train_log_csv<W: Write>(log: &[TrainLogRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["step", "loss_re", "loss_im"])?;
    for r in log {
        out.write_record([r.step.to_string(), fmt_f64(r.loss_re), fmt_f64(r.loss_im)])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_exactly() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}
