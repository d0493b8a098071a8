use std::time::Instant;

fn main() {
    qwalk::spectral::configure_blas_single_thread();
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2048);
    let ni = n as i32;
    let mut s = 42u64;
    let mut next = move || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut a = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = next();
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }

    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n - 1];
    let mut tau = vec![0.0; n - 1];
    let mut info = 0;
    let mut wq = [0.0];
    unsafe { lapack::dsytrd(b'L', ni, &mut a, ni, &mut d, &mut e, &mut tau, &mut wq, -1, &mut info) };
    let lwork = wq[0] as usize;
    let mut work = vec![0.0; lwork];
    let t0 = Instant::now();
    unsafe {
        lapack::dsytrd(b'L', ni, &mut a, ni, &mut d, &mut e, &mut tau, &mut work, lwork as i32, &mut info)
    };
    println!("dsytrd: {:.4}s (info={info})", t0.elapsed().as_secs_f64());

    // dstedc on a copy
    let mut d1 = d.clone();
    let mut e1 = e.clone();
    let mut z = vec![0.0; n * n];
    let mut wq = [0.0];
    let mut iwq = [0];
    unsafe { lapack::dstedc(b'I', ni, &mut d1, &mut e1, &mut z, ni, &mut wq, -1, &mut iwq, -1, &mut info) };
    let (lw, liw) = (wq[0] as usize, iwq[0] as usize);
    let mut work = vec![0.0; lw];
    let mut iwork = vec![0i32; liw];
    let t0 = Instant::now();
    unsafe {
        lapack::dstedc(b'I', ni, &mut d1, &mut e1, &mut z, ni, &mut work, lw as i32, &mut iwork, liw as i32, &mut info)
    };
    println!("dstedc: {:.4}s (info={info})", t0.elapsed().as_secs_f64());

    // dstemr on a copy
    let mut d2 = d.clone();
    let mut e2 = {
        let mut v = e.clone();
        v.push(0.0);
        v
    };
    let mut w = vec![0.0; n];
    let mut z2 = vec![0.0; n * n];
    let mut m = 0;
    let mut isuppz = vec![0i32; 2 * n];
    let mut tryrac = 1i32; // logical
    let mut wq = [0.0];
    let mut iwq = [0];
    unsafe {
        lapack::dstemr(
            b'V', b'A', ni, &mut d2, &mut e2, 0.0, 0.0, 0, 0, &mut m, &mut w, &mut z2, ni, &[ni],
            &mut isuppz, &mut tryrac, &mut wq, -1, &mut iwq, -1, &mut info,
        )
    };
    let (lw, liw) = (wq[0] as usize, iwq[0] as usize);
    let mut work = vec![0.0; lw];
    let mut iwork = vec![0i32; liw];
    let t0 = Instant::now();
    unsafe {
        lapack::dstemr(
            b'V', b'A', ni, &mut d2, &mut e2, 0.0, 0.0, 0, 0, &mut m, &mut w, &mut z2, ni, &[ni],
            &mut isuppz, &mut tryrac, &mut work, lw as i32, &mut iwork, liw as i32, &mut info,
        )
    };
    println!("dstemr: {:.4}s (info={info}, m={m})", t0.elapsed().as_secs_f64());

    // dormtr on 2 columns
    let mut c = vec![0.0; 2 * n];
    c[0] = 1.0;
    for i in 0..n {
        c[n + i] = (n as f64).powf(-0.5);
    }
    let mut wq = [0.0];
    unsafe { lapack::dormtr(b'L', b'L', b'T', ni, 2, &a, ni, &tau, &mut c, ni, &mut wq, -1, &mut info) };
    let lw = wq[0] as usize;
    let mut work = vec![0.0; lw];
    let t0 = Instant::now();
    unsafe {
        lapack::dormtr(b'L', b'L', b'T', ni, 2, &a, ni, &tau, &mut c, ni, &mut work, lw as i32, &mut info)
    };
    println!("dormtr(2): {:.4}s (info={info})", t0.elapsed().as_secs_f64());

    // row extraction
    let t0 = Instant::now();
    let mut acc = 0.0;
    for aidx in 0..n {
        let col = &z[aidx * n..(aidx + 1) * n];
        let mut su = 0.0;
        for i in 0..n {
            su += col[i] * c[i];
        }
        acc += su;
    }
    println!("rows: {:.4}s ({acc:.3e})", t0.elapsed().as_secs_f64());

    // compare eigenvalues dstedc vs dstemr
    let maxdiff = d1
        .iter()
        .zip(w.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    println!("max |eval diff| dstedc vs dstemr: {maxdiff:.3e}");
}
