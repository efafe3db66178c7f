//! Sampled penalty curves `(u, g(u), g'(u))` for external plotting.

use ladn_core::{L2Penalty, Penalty, PiecewiseLinearPenalty};

use crate::error::Result;

/// Samples per unit interval.
pub const RESOLUTION: usize = 1000;

/// A named penalty to sample.
#[derive(Debug, Clone)]
pub struct Curve {
    pub name: String,
    pub penalty: Penalty,
}

impl Curve {
    pub fn l2(name: impl Into<String>, alpha: f64) -> Result<Self> {
        Ok(Curve { name: name.into(), penalty: Penalty::L2(L2Penalty::new(alpha)?) })
    }

    pub fn piecewise(name: impl Into<String>, slopes: &[f64]) -> Result<Self> {
        Ok(Curve { name: name.into(), penalty: Penalty::Piecewise(PiecewiseLinearPenalty::new(slopes.to_vec())?) })
    }

    /// `(u, g(u), g'(u))` at `u = i / RESOLUTION`, `i = 0..=RESOLUTION`.
    pub fn sample(&self) -> Result<Vec<(f64, f64, f64)>> {
        (0..=RESOLUTION)
            .map(|i| {
                let u = i as f64 / RESOLUTION as f64;
                Ok((u, self.penalty.eval(u)?, self.penalty.derivative(u)?))
            })
            .collect()
    }
}

/// CSV `penalty,u,g,dg` with one block of rows per curve.
pub fn to_csv(curves: &[Curve]) -> Result<String> {
    let mut out = String::from("penalty,u,g,dg\n");
    for c in curves {
        for (u, g, dg) in c.sample()? {
            out.push_str(&format!("{},{u},{g},{dg}\n", c.name));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_reference_points() {
        let rows = Curve::l2("l2", 1.0).unwrap().sample().unwrap();
        assert_eq!(rows.len(), RESOLUTION + 1);
        assert!((rows[0].1 + 0.125).abs() < 1e-15);
        assert!((rows[250].2 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn curves_are_symmetric() {
        for c in [Curve::l2("a", 0.7).unwrap(), Curve::piecewise("b", &[0.5, 0.2, 0.3, 0.1]).unwrap()] {
            let g: Vec<f64> = c.sample().unwrap().iter().map(|r| r.1).collect();
            for (a, b) in g.iter().zip(g.iter().rev()) {
                assert!((a - b).abs() < 1e-12, "{} {a} {b}", c.name);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let text = to_csv(&[Curve::l2("l2", 1.0).unwrap()]).unwrap();
        assert_eq!(text.lines().count(), RESOLUTION + 2);
        assert_eq!(text.lines().nth(1), Some("l2,0,-0.125,0.5"));
    }
}
