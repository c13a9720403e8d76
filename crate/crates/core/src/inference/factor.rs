//! Dense factors over binary variables.

use crate::error::{Error, Result};

/// Largest factor scope the engine will materialise.
pub const MAX_FACTOR_VARS: usize = 22;

/// A table over binary variables. `vars` is sorted ascending; bit `i` of a
/// table index holds the value of `vars[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub vars: Vec<usize>,
    pub values: Vec<f64>,
}

impl Factor {
    pub fn unary(var: usize, if_false: f64, if_true: f64) -> Self {
        Factor {
            vars: vec![var],
            values: vec![if_false, if_true],
        }
    }

    fn from_fn(mut vars: Vec<usize>, f: impl Fn(&[bool]) -> f64) -> Self {
        vars.sort_unstable();
        let k = vars.len();
        let mut assignment = vec![false; k];
        let values = (0..1usize << k)
            .map(|idx| {
                for (b, a) in assignment.iter_mut().enumerate() {
                    *a = idx >> b & 1 == 1;
                }
                f(&assignment)
            })
            .collect();
        Factor { vars, values }
    }

    /// Indicator of `child == OR(parents)`.
    pub fn deterministic_or(parents: &[usize], child: usize) -> Self {
        let mut vars = parents.to_vec();
        vars.push(child);
        let sorted = {
            let mut v = vars.clone();
            v.sort_unstable();
            v
        };
        let child_pos = sorted.binary_search(&child).unwrap();
        Self::from_fn(vars, |a| {
            let any = a.iter().enumerate().any(|(i, &v)| i != child_pos && v);
            if a[child_pos] == any {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Indicator of `(exactly one of vars is true) == value`.
    pub fn exactly_one(vars: &[usize], value: bool) -> Self {
        Self::from_fn(vars.to_vec(), |a| {
            if (a.iter().filter(|&&v| v).count() == 1) == value {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn product(&self, other: &Factor) -> Result<Factor> {
        let mut vars: Vec<usize> = self.vars.iter().chain(&other.vars).copied().collect();
        vars.sort_unstable();
        vars.dedup();
        if vars.len() > MAX_FACTOR_VARS {
            return Err(Error::TooComplex {
                width: vars.len(),
                limit: MAX_FACTOR_VARS,
            });
        }
        // bit position in the product for each operand variable
        let pos = |of: &[usize]| -> Vec<usize> { of.iter().map(|v| vars.binary_search(v).unwrap()).collect() };
        let (pa, pb) = (pos(&self.vars), pos(&other.vars));
        let project = |idx: usize, positions: &[usize]| {
            positions
                .iter()
                .enumerate()
                .fold(0usize, |acc, (i, &p)| acc | ((idx >> p & 1) << i))
        };
        let values = (0..1usize << vars.len())
            .map(|idx| self.values[project(idx, &pa)] * other.values[project(idx, &pb)])
            .collect();
        Ok(Factor { vars, values })
    }

    /// Sums `var` out of the factor.
    pub fn marginalize(&self, var: usize) -> Factor {
        let Ok(p) = self.vars.binary_search(&var) else {
            return self.clone();
        };
        let low = (1usize << p) - 1;
        let values = (0..self.values.len() / 2)
            .map(|idx| {
                let base = (idx & low) | ((idx & !low) << 1);
                self.values[base] + self.values[base | 1 << p]
            })
            .collect();
        let mut vars = self.vars.clone();
        vars.remove(p);
        Factor { vars, values }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Scales to sum one; errors when every entry is zero.
    pub fn normalize(&mut self) -> Result<()> {
        let z = self.total();
        if !z.is_finite() || z <= 0.0 {
            return Err(Error::InfeasibleEvidence);
        }
        for v in &mut self.values {
            *v /= z;
        }
        Ok(())
    }
}
