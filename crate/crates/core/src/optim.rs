//! Derivative-free Nelder–Mead simplex minimization.
//!
//! Coefficients follow Lagarias et al. (1998): reflection 1, expansion 2,
//! contraction 0.5, shrink 0.5. Non-finite objective values are treated as
//! `+∞` so the simplex moves away from them.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOptions {
    pub tol_x: f64,
    pub tol_f: f64,
    pub max_iter: usize,
    /// Per-coordinate offsets for the initial simplex. When empty, uses 5 % of
    /// each coordinate (0.00025 for zero coordinates).
    pub initial_step: Vec<f64>,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            tol_x: 1e-8,
            tol_f: 1e-8,
            max_iter: 2000,
            initial_step: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const RHO: f64 = 1.0;
const CHI: f64 = 2.0;
const PSI: f64 = 0.5;
const SIGMA: f64 = 0.5;

/// Minimizes `f` starting at `x0`.
///
/// Converges when `max_i ‖x_i − x_best‖_∞ ≤ tol_x` and `max_i |f_i − f_best| ≤ tol_f`.
/// Reaching `max_iter` returns the best vertex with `converged = false`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty starting point".into()));
    }
    if !opts.initial_step.is_empty() && opts.initial_step.len() != n {
        return Err(Error::Dimension(format!(
            "initial_step has {} entries for {n} parameters",
            opts.initial_step.len()
        )));
    }
    let evaluations = std::cell::Cell::new(0usize);
    let mut eval = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let f0 = eval(x0);
    if !f0.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut fvals = vec![f0];
    for j in 0..n {
        let mut v = x0.to_vec();
        let step = match opts.initial_step.get(j) {
            Some(&s) => s,
            None if x0[j] != 0.0 => 0.05 * x0[j],
            None => 0.00025,
        };
        v[j] += step;
        fvals.push(eval(&v));
        simplex.push(v);
    }

    let mut order: Vec<usize> = (0..=n).collect();
    let mut iterations = 0usize;
    let mut centroid = vec![0.0; n];
    let trial = |base: &[f64], worst: &[f64], coef: f64, out: &mut Vec<f64>| {
        out.clear();
        out.extend(base.iter().zip(worst).map(|(b, w)| b + coef * (b - w)));
    };
    let (mut xr, mut xe, mut xc) = (Vec::new(), Vec::new(), Vec::new());

    loop {
        order.sort_by(|&a, &b| fvals[a].total_cmp(&fvals[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];
        let fb = fvals[best];
        let x_spread = order[1..]
            .iter()
            .flat_map(|&i| simplex[i].iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let f_spread = order[1..]
            .iter()
            .map(|&i| (fvals[i] - fb).abs())
            .fold(0.0, f64::max);
        if x_spread <= opts.tol_x && f_spread <= opts.tol_f {
            return Ok(Minimum {
                x: simplex[best].clone(),
                f: fb,
                iterations,
                evaluations: evaluations.get(),
                converged: true,
            });
        }
        if iterations >= opts.max_iter {
            return Ok(Minimum {
                x: simplex[best].clone(),
                f: fb,
                iterations,
                evaluations: evaluations.get(),
                converged: false,
            });
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&simplex[i]) {
                *c += v;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);

        trial(&centroid, &simplex[worst], RHO, &mut xr);
        let fr = eval(&xr);
        let mut shrink = false;
        if fr < fb {
            trial(&centroid, &simplex[worst], RHO * CHI, &mut xe);
            let fe = eval(&xe);
            if fe < fr {
                simplex[worst].clone_from(&xe);
                fvals[worst] = fe;
            } else {
                simplex[worst].clone_from(&xr);
                fvals[worst] = fr;
            }
        } else if fr < fvals[second_worst] {
            simplex[worst].clone_from(&xr);
            fvals[worst] = fr;
        } else if fr < fvals[worst] {
            // outside contraction
            trial(&centroid, &simplex[worst], PSI * RHO, &mut xc);
            let fc = eval(&xc);
            if fc <= fr {
                simplex[worst].clone_from(&xc);
                fvals[worst] = fc;
            } else {
                shrink = true;
            }
        } else {
            // inside contraction
            trial(&centroid, &simplex[worst], -PSI, &mut xc);
            let fcc = eval(&xc);
            if fcc < fvals[worst] {
                simplex[worst].clone_from(&xc);
                fvals[worst] = fcc;
            } else {
                shrink = true;
            }
        }
        if shrink {
            let xb = simplex[best].clone();
            for &i in &order[1..] {
                for (v, b) in simplex[i].iter_mut().zip(&xb) {
                    *v = b + SIGMA * (*v - b);
                }
                fvals[i] = eval(&simplex[i]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &NelderMeadOptions::default()).unwrap();
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m.x);
    }

    #[test]
    fn quadratic_bowl() {
        let m = nelder_mead(
            |x| (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2) + (x[2] - 0.5).powi(2),
            &[0.0, 0.0, 0.0],
            &NelderMeadOptions { initial_step: vec![1.0; 3], ..Default::default() },
        )
        .unwrap();
        assert!(m.converged);
        for (a, b) in m.x.iter().zip([3.0, -1.0, 0.5]) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn iteration_cap_returns_best_point() {
        let m = nelder_mead(
            rosenbrock,
            &[-1.2, 1.0],
            &NelderMeadOptions { max_iter: 5, ..Default::default() },
        )
        .unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 5);
        assert!(m.f <= rosenbrock(&[-1.2, 1.0]));
    }

    #[test]
    fn nonfinite_start_is_an_error() {
        assert!(matches!(
            nelder_mead(|_| f64::NAN, &[1.0], &NelderMeadOptions::default()),
            Err(Error::NonFiniteObjective)
        ));
    }

    #[test]
    fn nonfinite_regions_are_avoided() {
        // log barrier: undefined for x <= 0
        let m = nelder_mead(
            |x| if x[0] > 0.0 { x[0] - x[0].ln() } else { f64::NAN },
            &[5.0],
            &NelderMeadOptions { initial_step: vec![4.0], ..Default::default() },
        )
        .unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-4);
    }
}
