//! Probability-simplex helpers.

/// Euclidean projection onto `{p : p_i ≥ 0, Σ p_i = 1}` by sorting.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cumsum += x;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// All points of the simplex in `d` entries whose coordinates are multiples
/// of `1/steps`, in lexicographic order.
pub fn simplex_grid(d: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(d: usize, left: usize, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == d {
            cur.push(left);
            out.push(cur.iter().map(|&k| k as f64 / steps as f64).collect());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(d, left - k, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if d > 0 {
        rec(d, steps, steps, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_examples() {
        assert_eq!(project_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        for x in &p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = project_simplex(&[1.0, -3.0, 0.4]);
        assert!((p[0] - 0.8).abs() < 1e-15 && p[1] == 0.0 && (p[2] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn grid_counts() {
        // compositions of 4 into 3 parts
        assert_eq!(simplex_grid(3, 4).len(), 15);
        assert_eq!(simplex_grid(2, 4)[1], vec![0.25, 0.75]);
        for p in simplex_grid(4, 3) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }
}
