//! Brute-force reference computations used to check the fast algorithms.

use crate::special::ln_gamma;

/// Calls `visit` with every vector of `m` counts, each ≥ 1, summing to `n`.
pub fn for_each_composition(m: usize, n: u64, visit: &mut dyn FnMut(&[u64])) {
    fn rec(slot: usize, left: u64, counts: &mut Vec<u64>, visit: &mut dyn FnMut(&[u64])) {
        let m = counts.len();
        if slot == m - 1 {
            counts[slot] = left;
            visit(counts);
            return;
        }
        let rest = (m - 1 - slot) as u64;
        for k in 1..=left - rest {
            counts[slot] = k;
            rec(slot + 1, left - k, counts, visit);
        }
    }
    if m == 0 || n < m as u64 {
        return;
    }
    let mut counts = vec![0; m];
    rec(0, n, &mut counts, visit);
}

/// (log F_N, v) by summing the multinomial weight N!/Πc! Πp^c over all
/// admissible count vectors.
pub fn enumerate_truncated_multinomial(p: &[f64], n: u64) -> (f64, Vec<f64>) {
    let log_n_fact = ln_gamma(n as f64 + 1.0);
    let mut total = 0.0;
    let mut first = vec![0.0; p.len()];
    for_each_composition(p.len(), n, &mut |c| {
        let log_w: f64 = log_n_fact
            + c.iter()
                .zip(p)
                .map(|(&k, &pi)| k as f64 * pi.ln() - ln_gamma(k as f64 + 1.0))
                .sum::<f64>();
        let w = log_w.exp();
        total += w;
        for (acc, &k) in first.iter_mut().zip(c) {
            *acc += k as f64 * w;
        }
    });
    (total.ln(), first.iter().map(|f| f / total).collect())
}

/// N!·[λ^N] Π_i (e^{λ p_i} − 1) by explicit power-series multiplication.
pub fn egf_f_n(p: &[f64], n: u64) -> f64 {
    let n = n as usize;
    let mut poly = vec![0.0; n + 1];
    poly[0] = 1.0;
    for &pi in p {
        let mut factor = vec![0.0; n + 1];
        let mut term = 1.0;
        for (k, slot) in factor.iter_mut().enumerate().skip(1) {
            term *= pi / k as f64;
            *slot = term;
        }
        let mut next = vec![0.0; n + 1];
        for (a, &ca) in poly.iter().enumerate() {
            for (b, &cb) in factor.iter().enumerate().take(n + 1 - a) {
                next[a + b] += ca * cb;
            }
        }
        poly = next;
    }
    let n_fact: f64 = (1..=n).map(|k| k as f64).product();
    poly[n] * n_fact
}

/// Inclusion–exclusion form F_N = Σ_{T⊆S} (−1)^{|S|−|T|} (Σ_T p)^N.
pub fn inclusion_exclusion_f_n(p: &[f64], n: u64) -> f64 {
    let m = p.len();
    (0u32..1 << m)
        .map(|mask| {
            let sum: f64 = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| p[i]).sum();
            let sign = if (m as u32 - mask.count_ones()).is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * sum.powi(n as i32)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compositions_counted() {
        let mut k = 0;
        for_each_composition(3, 6, &mut |_| k += 1);
        // C(5, 2)
        assert_eq!(k, 10);
    }

    #[test]
    fn oracles_agree() {
        let p = [0.3, 1.7, 2.2];
        for n in 3..=6 {
            let (log_f, _) = enumerate_truncated_multinomial(&p, n);
            let a = egf_f_n(&p, n);
            let b = inclusion_exclusion_f_n(&p, n);
            assert!((log_f.exp() / a - 1.0).abs() < 1e-12);
            assert!((a / b - 1.0).abs() < 1e-12);
        }
    }
}
