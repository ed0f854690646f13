//! Derivative-free Nelder-Mead simplex minimization.

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub max_iter: usize,
    /// Converged when both the spread of function values across the simplex
    /// and the largest vertex distance from the best vertex fall below this.
    pub tol: f64,
    /// Edge length of the initial simplex along each coordinate.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tol: 1e-9,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub start_value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

impl NelderMead {
    /// Minimizes `f` from `x0`. Non-finite objective values are treated as
    /// `+inf`, so infeasible regions are simply never accepted.
    pub fn minimize(&self, mut f: impl FnMut(&[f64]) -> f64, x0: &[f64]) -> Minimum {
        let dim = x0.len();
        let mut evaluations = 0usize;
        let mut eval = |x: &[f64]| {
            evaluations += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
        simplex.push(x0.to_vec());
        for i in 0..dim {
            let mut v = x0.to_vec();
            v[i] += self.initial_step;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
        let start_value = values[0];

        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            order(&mut simplex, &mut values);
            if spread(&simplex, &values) < self.tol {
                converged = true;
                break;
            }
            iterations += 1;

            let worst = dim;
            let centroid: Vec<f64> = (0..dim)
                .map(|j| simplex[..dim].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[worst])
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let reflected = along(REFLECT);
            let f_r = eval(&reflected);
            if f_r < values[0] {
                let expanded = along(EXPAND);
                let f_e = eval(&expanded);
                if f_e < f_r {
                    simplex[worst] = expanded;
                    values[worst] = f_e;
                } else {
                    simplex[worst] = reflected;
                    values[worst] = f_r;
                }
                continue;
            }
            if f_r < values[dim - 1] {
                simplex[worst] = reflected;
                values[worst] = f_r;
                continue;
            }
            let (contracted, f_c) = if f_r < values[worst] {
                let c = along(CONTRACT);
                let fc = eval(&c);
                (c, fc)
            } else {
                let c = along(-CONTRACT);
                let fc = eval(&c);
                (c, fc)
            };
            if f_c < values[worst].min(f_r) {
                simplex[worst] = contracted;
                values[worst] = f_c;
                continue;
            }
            let best = simplex[0].clone();
            for k in 1..=dim {
                for (x, b) in simplex[k].iter_mut().zip(&best) {
                    *x = b + SHRINK * (*x - b);
                }
                values[k] = eval(&simplex[k]);
            }
        }
        order(&mut simplex, &mut values);
        Minimum {
            x: simplex.swap_remove(0),
            value: values[0],
            start_value,
            iterations,
            evaluations,
            converged,
        }
    }
}

/// Sorts vertices by value; ties keep their previous order.
fn order(simplex: &mut [Vec<f64>], values: &mut [f64]) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let s: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
    let v: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
    simplex.clone_from_slice(&s);
    values.copy_from_slice(&v);
}

fn spread(simplex: &[Vec<f64>], values: &[f64]) -> f64 {
    let best = &simplex[0];
    let f_spread = values
        .iter()
        .map(|v| libm::fabs(v - values[0]))
        .fold(0.0, f64::max);
    let x_spread = simplex[1..]
        .iter()
        .map(|v| {
            v.iter()
                .zip(best)
                .map(|(a, b)| libm::fabs(a - b))
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    f_spread.max(x_spread)
}
