//! Small dense solves for the costate recursion.

/// Solves `a · x = b` in place for an `n × n` row-major matrix by Gaussian
/// elimination with partial pivoting. Returns `None` when a pivot vanishes.
pub(crate) fn solve_in_place(a: &mut [f64], b: &mut [f64], n: usize) -> Option<()> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
            .expect("non-empty range");
        let pivot = a[pivot_row * n + col];
        if pivot.is_nan() || pivot.abs() <= 1e-12 * scale {
            return None;
        }
        if pivot_row != col {
            for c in 0..n {
                a.swap(col * n + c, pivot_row * n + c);
            }
            b.swap(col, pivot_row);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / pivot;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            b[r] -= f * b[col];
        }
    }
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r * n + c] * b[c]).sum();
        b[r] = (b[r] - s) / a[r * n + r];
    }
    Some(())
}
