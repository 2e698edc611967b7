use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").expect("set by cargo"));
    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("STAIRCLIMB_H".into()),
        cpp_compat: true,
        usize_is_size_t: true,
        documentation: true,
        export: cbindgen::ExportConfig {
            include: vec!["ScGoal".into()],
            ..Default::default()
        },
        enumeration: cbindgen::EnumConfig {
            prefix_with_name: true,
            ..Default::default()
        },
        ..Default::default()
    };
    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("header generation")
        .write_to_file(crate_dir.join("include").join("stairclimb.h"));
    println!("cargo:rerun-if-changed=src/lib.rs");
}
