use std::time::Instant;

use ndarray::Array2;
use ndarray_linalg::Eigh;
use qwalk::spectral::eigen_overlaps;

fn random_sym(n: usize, seed: u64) -> Array2<f64> {
    let mut s = seed;
    let mut next = move || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let v = next();
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    m
}

fn main() {
    qwalk::spectral::configure_blas_single_thread();
    for &n in &[256usize, 512, 1024, 2048] {
        let h = random_sym(n, 42);
        let u: Vec<f64> = (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
        let w: Vec<f64> = vec![(n as f64).powf(-0.5); n];

        let t0 = Instant::now();
        let reps = if n <= 512 { 5 } else { 2 };
        for _ in 0..reps {
            let r = eigen_overlaps(h.clone(), &u, &w).unwrap();
            std::hint::black_box(r.eigenvalues[0]);
        }
        let dt_overlap = t0.elapsed().as_secs_f64() / reps as f64;

        let t0 = Instant::now();
        let (vals, _vecs) = h.eigh(ndarray_linalg::UPLO::Lower).unwrap();
        let dt_eigh = t0.elapsed().as_secs_f64();
        std::hint::black_box(vals[0]);

        println!("n={n:5}  overlap-kernel {dt_overlap:8.4}s   eigh {dt_eigh:8.4}s");
    }
}
