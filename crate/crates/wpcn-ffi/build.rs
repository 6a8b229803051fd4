use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").unwrap());
    let mut config = cbindgen::Config::default();
    config.language = cbindgen::Language::C;
    config.include_guard = Some("WPCN_H".to_string());
    config.cpp_compat = true;
    config.documentation = true;
    config.header = Some(
        "/* C interface for the wpcn resource-allocation solvers.\n\
         \x20* Generated by cbindgen; do not edit by hand. */"
            .to_string(),
    );
    let header = crate_dir.join("include").join("wpcn.h");
    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("cbindgen failed to generate the C header")
        .write_to_file(&header);
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=build.rs");
}
