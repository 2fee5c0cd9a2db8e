//! Compiles a C program against the generated header and the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "fracreg.h"

int main(void) {
    double v = 0.0;
    if (fracreg_fbm_covariance(2.0, 1.0, 0.5, &v) != FRACREG_STATUS_OK || v != 1.0) return 1;
    if (fracreg_fbm_covariance(1.0, 1.0, 2.0, &v) != FRACREG_STATUS_DOMAIN) return 2;
    if (fracreg_last_error_message() == NULL) return 3;

    FracregRegion r;
    if (fracreg_admissible_region(0.5, 0.5, &r) != FRACREG_STATUS_OK) return 4;
    if (r.lower != 0.0 || r.upper != 0.5 || !r.nonempty) return 5;

    FracregGenerator *g = NULL;
    if (fracreg_generator_new(FRACREG_GENERATOR_KIND_CHOLESKY, 16, 0.7, &g) != FRACREG_STATUS_OK) return 6;
    double path[17];
    if (fracreg_generator_sample(g, 5, 0, path, 17) != FRACREG_STATUS_OK) return 7;
    fracreg_generator_free(g);
    if (path[0] != 0.0) return 8;

    const char *plan = "{\"h1\":0.5,\"h2\":0.5,\"alpha\":0.25,\"n\":16,\"replicates\":100,\"master_seed\":1}";
    char *json = NULL;
    if (fracreg_run_experiment("variance", plan, &json) != FRACREG_STATUS_OK) return 9;
    if (strstr(json, "\"variance\"") == NULL) return 10;
    fracreg_string_free(json);
    printf("ok %s\n", fracreg_version());
    return 0;
}
"#;

/// `target/<profile>`, two levels above this test executable in `deps/`.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links() {
    let lib = profile_dir().join("libfracreg_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".to_owned());
    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("smoke.c");
    let binary = dir.path().join("smoke");
    std::fs::write(&source, PROGRAM).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");

    let compiled = match Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&source)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&binary)
        .output()
    {
        Ok(out) => out,
        Err(e) => {
            eprintln!("skipping: no C compiler ({e})");
            return;
        }
    };
    assert!(
        compiled.status.success(),
        "{}",
        String::from_utf8_lossy(&compiled.stderr)
    );

    let run = Command::new(&binary).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
