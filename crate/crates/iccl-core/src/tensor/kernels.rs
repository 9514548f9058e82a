//! Dense f64 kernels backing the tensor ops.
//!
//! Every parallel variant partitions work by output row and runs the same
//! sequential inner loop per row, so results are bit-identical to the
//! sequential path for any thread count. Reductions that cross rows
//! (column sums, full sums) stay sequential to keep a fixed accumulation
//! order.
//!
//! Parallel execution requires the `parallel` feature and `ICCL_THREADS > 1`
//! (default 1). `ICCL_THREADS` is read once per process.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Work threshold (in multiply-adds / elements) below which the sequential
/// path is used even when a thread pool is available.
pub const PAR_THRESHOLD: usize = 1 << 15;

#[cfg(feature = "parallel")]
pub fn thread_pool() -> Option<&'static rayon::ThreadPool> {
    use std::sync::OnceLock;
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("ICCL_THREADS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .unwrap_or(1);
        if threads <= 1 {
            None
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .ok()
        }
    })
    .as_ref()
}

#[cfg(not(feature = "parallel"))]
fn pool_if_worthwhile(_work: usize) -> Option<()> {
    None
}

#[cfg(feature = "parallel")]
fn pool_if_worthwhile(work: usize) -> Option<&'static rayon::ThreadPool> {
    if work >= PAR_THRESHOLD {
        thread_pool()
    } else {
        None
    }
}

fn mm_nn_row(a_row: &[f64], b: &[f64], n: usize, out_row: &mut [f64]) {
    out_row.fill(0.0);
    for (kk, &av) in a_row.iter().enumerate() {
        let b_row = &b[kk * n..kk * n + n];
        for (o, &bv) in out_row.iter_mut().zip(b_row) {
            *o += av * bv;
        }
    }
}

fn mm_nt_row(a_row: &[f64], b: &[f64], k: usize, out_row: &mut [f64]) {
    for (j, o) in out_row.iter_mut().enumerate() {
        let b_row = &b[j * k..j * k + k];
        let mut acc = 0.0;
        for (&av, &bv) in a_row.iter().zip(b_row) {
            acc += av * bv;
        }
        *o = acc;
    }
}

fn mm_tn_row(a: &[f64], b: &[f64], col: usize, k: usize, n: usize, m: usize, out_row: &mut [f64]) {
    out_row.fill(0.0);
    for i in 0..m {
        let av = a[i * k + col];
        let b_row = &b[i * n..i * n + n];
        for (o, &bv) in out_row.iter_mut().zip(b_row) {
            *o += av * bv;
        }
    }
}

/// `A[m,k] * B[k,n]`, sequential.
pub fn mm_nn_seq(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        mm_nn_row(&a[i * k..i * k + k], b, n, &mut out[i * n..i * n + n]);
    }
}

/// `A[m,k] * B[n,k]^T`, sequential.
pub fn mm_nt_seq(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        mm_nt_row(&a[i * k..i * k + k], b, k, &mut out[i * n..i * n + n]);
    }
}

/// `A[m,k]^T * B[m,n]`, sequential. Output is `[k,n]`.
pub fn mm_tn_seq(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for col in 0..k {
        mm_tn_row(a, b, col, k, n, m, &mut out[col * n..col * n + n]);
    }
}

#[cfg(feature = "parallel")]
pub fn mm_nn_par(
    pool: &rayon::ThreadPool,
    a: &[f64],
    b: &[f64],
    _m: usize,
    k: usize,
    n: usize,
    out: &mut [f64],
) {
    pool.install(|| {
        out.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| mm_nn_row(&a[i * k..i * k + k], b, n, row));
    });
}

#[cfg(feature = "parallel")]
pub fn mm_nt_par(
    pool: &rayon::ThreadPool,
    a: &[f64],
    b: &[f64],
    _m: usize,
    k: usize,
    n: usize,
    out: &mut [f64],
) {
    pool.install(|| {
        out.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| mm_nt_row(&a[i * k..i * k + k], b, k, row));
    });
}

#[cfg(feature = "parallel")]
pub fn mm_tn_par(
    pool: &rayon::ThreadPool,
    a: &[f64],
    b: &[f64],
    m: usize,
    k: usize,
    n: usize,
    out: &mut [f64],
) {
    pool.install(|| {
        out.par_chunks_mut(n)
            .enumerate()
            .for_each(|(col, row)| mm_tn_row(a, b, col, k, n, m, row));
    });
}

pub fn mm_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    #[cfg(feature = "parallel")]
    if let Some(pool) = pool_if_worthwhile(m * k * n) {
        mm_nn_par(pool, a, b, m, k, n, &mut out);
        return out;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = pool_if_worthwhile(m * k * n);
    mm_nn_seq(a, b, m, k, n, &mut out);
    out
}

pub fn mm_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    #[cfg(feature = "parallel")]
    if let Some(pool) = pool_if_worthwhile(m * k * n) {
        mm_nt_par(pool, a, b, m, k, n, &mut out);
        return out;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = pool_if_worthwhile(m * k * n);
    mm_nt_seq(a, b, m, k, n, &mut out);
    out
}

pub fn mm_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * n];
    #[cfg(feature = "parallel")]
    if let Some(pool) = pool_if_worthwhile(m * k * n) {
        mm_tn_par(pool, a, b, m, k, n, &mut out);
        return out;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = pool_if_worthwhile(m * k * n);
    mm_tn_seq(a, b, m, k, n, &mut out);
    out
}

pub fn zip_map_seq(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64 + Sync, out: &mut [f64]) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = f(x, y);
    }
}

#[cfg(feature = "parallel")]
pub fn zip_map_par(
    pool: &rayon::ThreadPool,
    a: &[f64],
    b: &[f64],
    f: impl Fn(f64, f64) -> f64 + Sync,
    out: &mut [f64],
) {
    pool.install(|| {
        out.par_iter_mut()
            .zip(a.par_iter())
            .zip(b.par_iter())
            .for_each(|((o, &x), &y)| *o = f(x, y));
    });
}

/// Elementwise binary combine; parallel when large.
pub fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64 + Sync) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    #[cfg(feature = "parallel")]
    if let Some(pool) = pool_if_worthwhile(a.len()) {
        zip_map_par(pool, a, b, f, &mut out);
        return out;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = pool_if_worthwhile(a.len());
    zip_map_seq(a, b, f, &mut out);
    out
}

pub fn map_seq(a: &[f64], f: impl Fn(f64) -> f64 + Sync, out: &mut [f64]) {
    for (o, &x) in out.iter_mut().zip(a) {
        *o = f(x);
    }
}

#[cfg(feature = "parallel")]
pub fn map_par(pool: &rayon::ThreadPool, a: &[f64], f: impl Fn(f64) -> f64 + Sync, out: &mut [f64]) {
    pool.install(|| {
        out.par_iter_mut()
            .zip(a.par_iter())
            .for_each(|(o, &x)| *o = f(x));
    });
}

/// Elementwise map; parallel when large.
pub fn map(a: &[f64], f: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    #[cfg(feature = "parallel")]
    if let Some(pool) = pool_if_worthwhile(a.len()) {
        map_par(pool, a, f, &mut out);
        return out;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = pool_if_worthwhile(a.len());
    map_seq(a, f, &mut out);
    out
}

/// Sequential dot product (fixed accumulation order).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Sequential sum (fixed accumulation order).
pub fn sum(a: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &x in a {
        acc += x;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_variants_agree_with_naive() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [7.0, 8.0, 9.0, 10.0, 11.0, 12.0]; // 3x2
        let c = mm_nn(&a, &b, 2, 3, 2);
        assert_eq!(c, vec![58.0, 64.0, 139.0, 154.0]);

        // A * B^T with B stored as 2x3 equals A * (B^T as 3x2 above).
        let bt = [7.0, 9.0, 11.0, 8.0, 10.0, 12.0]; // 2x3
        let c2 = mm_nt(&a, &bt, 2, 3, 2);
        assert_eq!(c2, c);

        // A^T * A for the 2x3 A.
        let g = mm_tn(&a, &a, 2, 3, 3);
        assert_eq!(g[0], 1.0 * 1.0 + 4.0 * 4.0);
        assert_eq!(g[4], 2.0 * 2.0 + 5.0 * 5.0);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential_bitwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (m, k, n) = (17, 23, 11);
        let a: Vec<f64> = (0..m * k).map(|_| rng.random::<f64>() - 0.5).collect();
        let b: Vec<f64> = (0..k * n).map(|_| rng.random::<f64>() - 0.5).collect();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();

        let mut seq = vec![0.0; m * n];
        let mut par = vec![0.0; m * n];
        mm_nn_seq(&a, &b, m, k, n, &mut seq);
        mm_nn_par(&pool, &a, &b, m, k, n, &mut par);
        assert!(seq.iter().zip(&par).all(|(x, y)| x.to_bits() == y.to_bits()));

        let mut seq = vec![0.0; m * n];
        let mut par = vec![0.0; m * n];
        let b2: Vec<f64> = (0..n * k).map(|_| rng.random::<f64>() - 0.5).collect();
        mm_nt_seq(&a, &b2, m, k, n, &mut seq);
        mm_nt_par(&pool, &a, &b2, m, k, n, &mut par);
        assert!(seq.iter().zip(&par).all(|(x, y)| x.to_bits() == y.to_bits()));

        let mut seq = vec![0.0; k * n];
        let mut par = vec![0.0; k * n];
        let b3: Vec<f64> = (0..m * n).map(|_| rng.random::<f64>() - 0.5).collect();
        mm_tn_seq(&a, &b3, m, k, n, &mut seq);
        mm_tn_par(&pool, &a, &b3, m, k, n, &mut par);
        assert!(seq.iter().zip(&par).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
