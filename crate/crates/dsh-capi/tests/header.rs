//! Checks the generated C header: key declarations are present and the
//! file parses as both C and C++ when a suitable compiler is installed.

use std::path::{Path, PathBuf};
use std::process::Command;

fn header_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/dsh.h")
}

fn syntax_check(compiler: &str, extra: &[&str]) {
    let header = header_path();
    let dir = tempfile::tempdir().unwrap();
    let main = dir.path().join("use_header.c");
    std::fs::write(
        &main,
        "#include \"dsh.h\"\n\
         int main(void) { return (int)DSH_OK + (dsh_version() != 0 ? 0 : 1); }\n",
    )
    .unwrap();
    let out = Command::new(compiler)
        .args(["-Wall", "-Wextra", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .args(extra)
        .arg(&main)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{compiler} rejected the header:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn have(compiler: &str) -> bool {
    Command::new(compiler)
        .arg("--version")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

#[test]
fn the_header_declares_the_full_api() {
    let text = std::fs::read_to_string(header_path()).unwrap();
    for symbol in [
        "typedef enum DshStatus",
        "typedef struct DshCodes DshCodes",
        "typedef struct DshDataset DshDataset",
        "typedef struct DshModel DshModel",
        "dsh_version",
        "dsh_last_error",
        "dsh_dataset_from_buffer",
        "dsh_dataset_load_fvecs",
        "dsh_dataset_load_bvecs",
        "dsh_train_dsh",
        "dsh_train_lsh",
        "dsh_train_pcah",
        "dsh_model_save",
        "dsh_model_load",
        "dsh_encode",
        "dsh_codes_save",
        "dsh_codes_load",
        "dsh_encode_query",
        "dsh_search",
    ] {
        assert!(text.contains(symbol), "header is missing {symbol}");
    }
}

#[test]
fn the_header_is_valid_c99() {
    if !have("cc") {
        eprintln!("no cc on PATH; skipping the C syntax check");
        return;
    }
    syntax_check("cc", &["-std=c99"]);
}

#[test]
fn the_header_is_valid_cpp() {
    if !have("g++") {
        eprintln!("no g++ on PATH; skipping the C++ syntax check");
        return;
    }
    syntax_check("g++", &["-x", "c++"]);
}
