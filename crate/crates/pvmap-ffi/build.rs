use std::path::Path;

fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR");
    let header_path = Path::new(&crate_dir).join("include/pvmap_ffi.h");
    let config = cbindgen::Config::from_file(Path::new(&crate_dir).join("cbindgen.toml"))
        .expect("cbindgen.toml parses");
    let bindings = cbindgen::Builder::new()
        .with_config(config)
        .with_crate(&crate_dir)
        .generate()
        .expect("cbindgen generates the header");
    // Rewrite only on change so incremental builds don't churn the file.
    let mut buf = Vec::new();
    bindings.write(&mut buf);
    let current = std::fs::read(&header_path).unwrap_or_default();
    if current != buf {
        std::fs::create_dir_all(header_path.parent().unwrap()).expect("include dir");
        std::fs::write(&header_path, &buf).expect("write header");
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
