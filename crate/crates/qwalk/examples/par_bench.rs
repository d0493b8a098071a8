use std::time::Instant;

use ndarray::Array2;
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
    let n = 2048;
    let u: Vec<f64> = (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
    let w: Vec<f64> = vec![(n as f64).powf(-0.5); n];

    let t0 = Instant::now();
    let h = random_sym(n, 1);
    eigen_overlaps(h, &u, &w).unwrap();
    println!("1 solve serial: {:.3}s", t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let hs: Vec<_> = (0..4).map(|i| random_sym(n, i + 10)).collect();
    let gen = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    rayon::scope(|sc| {
        for h in hs {
            let (u, w) = (&u, &w);
            sc.spawn(move |_| {
                eigen_overlaps(h, u, w).unwrap();
            });
        }
    });
    let dt = t0.elapsed().as_secs_f64();
    println!("4 solves on 2 threads: {:.3}s total => {:.3}s/solve (gen {gen:.3}s)", dt, dt / 4.0);
}
