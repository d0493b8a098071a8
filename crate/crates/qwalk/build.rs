// Links the system OpenBLAS (which bundles LAPACK). The LAPACK bindings in
// the `lapack`/`lapack-sys` crates declare symbols only; a provider must be
// linked explicitly.
fn main() {
    println!("cargo:rustc-link-lib=dylib=openblas");
}
