//! Closed-form expectations of the Gamma–Poisson model, before sampling and
//! conditioned on the sampled set.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::likelihoods::ModelParams;
use crate::special::psi;

/// Pointwise moments for a single point with shape `a = αx` under rates
/// (b, λ). `r` is λ/b.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Point {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
}

impl Point {
    fn log1p_r(&self) -> f64 {
        (self.lambda / self.b).ln_1p()
    }

    /// P(c = 0) = (1 + λ/b)^{−a}
    pub fn p_zero(&self) -> f64 {
        (-self.a * self.log1p_r()).exp()
    }

    /// P(c ≥ 1)
    pub fn p_pos(&self) -> f64 {
        -(-self.a * self.log1p_r()).exp_m1()
    }

    /// E(c) = λa/b
    pub fn e_c(&self) -> f64 {
        self.lambda * self.a / self.b
    }

    /// E(log p · 1{c ≥ 1})
    pub fn e_logp_pos(&self) -> f64 {
        (psi(self.a) - self.b.ln()) * self.p_pos() + self.log1p_r() * self.p_zero()
    }

    /// E(p · 1{c ≥ 1})
    pub fn e_p_pos(&self) -> f64 {
        self.a / self.b * -(-(self.a + 1.0) * self.log1p_r()).exp_m1()
    }

    /// E(p · 1{c = 0})
    pub fn e_p_zero(&self) -> f64 {
        self.a / self.b * (-(self.a + 1.0) * self.log1p_r()).exp()
    }

    pub fn e_p(&self) -> f64 {
        self.a / self.b
    }

    pub fn e_c_given_pos(&self) -> f64 {
        self.e_c() / self.p_pos()
    }

    pub fn e_logp_given_pos(&self) -> f64 {
        let l = self.log1p_r();
        psi(self.a) - self.b.ln() + l / (self.a * l).exp_m1()
    }

    pub fn e_p_given_pos(&self) -> f64 {
        self.e_p_pos() / self.p_pos()
    }

    pub fn e_p_given_zero(&self) -> f64 {
        self.a / (self.b + self.lambda)
    }
}

/// E(c | c ≥ 1, p) = λp / (1 − e^{−λp}); 1 in the limit λp → 0.
pub(crate) fn e_c_given_p(lambda: f64, p: f64) -> f64 {
    let t = lambda * p;
    if t == 0.0 {
        1.0
    } else {
        t / -(-t).exp_m1()
    }
}

/// What is known when the expectations are taken.
#[derive(Debug, Clone, Copy)]
pub enum Conditioning<'a> {
    /// Before any sampling.
    Prior,
    /// The sampled set S is known, but not its counts or masses.
    GivenS(&'a [usize]),
    /// S and the masses on S are known; `p[k]` belongs to `s[k]`.
    GivenSp { s: &'a [usize], p: &'a [f64] },
}

fn point(x: f64, params: &ModelParams) -> Point {
    Point {
        a: params.alpha * x,
        b: params.b,
        lambda: params.lambda,
    }
}

fn membership(domain: usize, s: &[usize]) -> Result<Vec<bool>> {
    let mut in_s = vec![false; domain];
    for &i in s {
        if i >= domain {
            return Err(Error::InvalidInput(format!("index {i} outside a domain of {domain}")));
        }
        if in_s[i] {
            return Err(Error::InvalidInput(format!("index {i} repeated in S")));
        }
        in_s[i] = true;
    }
    Ok(in_s)
}

/// Expectations of M, N, U, V, W, X, Y, Z keyed by name.
///
/// Under `GivenS` the known M, X, Y are returned as-is and N, U, V, W, Z
/// are conditional expectations; under `GivenSp` only N is random and V is
/// returned as observed. Points with x = 0 contribute nothing.
pub fn expected_values(x: &[f64], params: &ModelParams, conditioning: Conditioning) -> Result<BTreeMap<String, f64>> {
    params.validate()?;
    let mut out = BTreeMap::new();
    let mut put = |k: &str, v: f64| {
        out.insert(k.to_string(), v);
    };
    match conditioning {
        Conditioning::Prior => {
            let (mut m, mut n, mut u, mut v, mut w, mut xs, mut y, mut z) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for &xi in x.iter().filter(|&&xi| xi > 0.0) {
                let pt = point(xi, params);
                m += pt.p_pos();
                n += pt.e_c();
                u += xi * pt.e_logp_pos();
                v += pt.e_p_pos();
                w += pt.e_p_zero();
                xs += xi * pt.p_pos();
                y += xi * pt.p_zero();
                z += pt.e_p();
            }
            put("M", m);
            put("N", n);
            put("U", u);
            put("V", v);
            put("W", w);
            put("X", xs);
            put("Y", y);
            put("Z", z);
        }
        Conditioning::GivenS(s) => {
            let in_s = membership(x.len(), s)?;
            let (mut n, mut u, mut v, mut w, mut xs, mut y) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for (i, &xi) in x.iter().enumerate() {
                if in_s[i] {
                    if xi <= 0.0 {
                        return Err(Error::InvalidInput(format!("point {i} has x = 0 but is in S")));
                    }
                    let pt = point(xi, params);
                    n += pt.e_c_given_pos();
                    u += xi * pt.e_logp_given_pos();
                    v += pt.e_p_given_pos();
                    xs += xi;
                } else if xi > 0.0 {
                    w += point(xi, params).e_p_given_zero();
                    y += xi;
                }
            }
            put("M", s.len() as f64);
            put("N", n);
            put("U", u);
            put("V", v);
            put("W", w);
            put("X", xs);
            put("Y", y);
            put("Z", v + w);
        }
        Conditioning::GivenSp { s, p } => {
            if s.len() != p.len() {
                return Err(Error::InvalidInput("S and p|S must align".into()));
            }
            membership(x.len(), s)?;
            put("M", s.len() as f64);
            put("N", p.iter().map(|&pi| e_c_given_p(params.lambda, pi)).sum());
            put("V", p.iter().sum());
        }
    }
    Ok(out)
}
