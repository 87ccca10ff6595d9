//! Compiles and runs a small C program against include/securedl.h and
//! the built static library, proving the header matches the ABI.

use std::env;
use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "securedl.h"

int main(void) {
    if (strlen(sdl_version()) < 3) return 10;

    SdlConfig *cfg = NULL;
    const char *json =
        "{\"clients\": 3, \"rounds\": 2, \"train_samples\": 240,"
        " \"test_samples\": 80, \"seed\": 5}";
    if (sdl_config_from_json(json, &cfg) != SDL_STATUS_OK) return 11;

    SdlRun *run = NULL;
    if (sdl_run_new(cfg, &run) != SDL_STATUS_OK) return 12;
    sdl_config_free(cfg);

    size_t rounds = 0;
    if (sdl_run_round_count(run, &rounds) != SDL_STATUS_OK || rounds != 2) return 13;

    char *csv = NULL;
    if (sdl_run_metrics_csv(run, &csv) != SDL_STATUS_OK) return 14;
    if (strncmp(csv, "round,mean_acc,", 15) != 0) return 15;
    sdl_string_free(csv);
    sdl_run_free(run);

    double updates[4] = {1.0, 3.0, -2.0, 8.0};
    double out = 0.0;
    if (sdl_aggregate(SDL_AGGREGATE_RULE_MEAN, updates, 4, 1, 0, &out) != SDL_STATUS_OK)
        return 16;
    if (out != 2.5) return 17;

    if (sdl_aggregate(SDL_AGGREGATE_RULE_MEAN, NULL, 4, 1, 0, &out)
        != SDL_STATUS_NULL_ARGUMENT) return 18;
    if (sdl_last_error_message() == NULL) return 19;

    printf("ok\n");
    return 0;
}
"#;

/// target/debug (or equivalent) for the running test binary, which lives
/// one level down in deps/.
fn target_dir() -> PathBuf {
    let mut dir = env::current_exe().expect("test binary path");
    dir.pop();
    dir.pop();
    dir
}

#[test]
fn c_program_links_against_the_generated_header() {
    let staticlib = target_dir().join("libsecuredl_ffi.a");
    if !staticlib.exists() {
        // Plain `cargo test` links the rlib and never produces the
        // staticlib artifact; build it.
        let cargo = env::var("CARGO").unwrap_or_else(|_| "cargo".into());
        let build = Command::new(cargo)
            .args(["build", "-p", "securedl-ffi"])
            .output()
            .expect("cargo runs");
        assert!(
            build.status.success(),
            "cargo build failed:\n{}",
            String::from_utf8_lossy(&build.stderr)
        );
    }
    assert!(
        staticlib.exists(),
        "static library missing at {}",
        staticlib.display()
    );
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();

    let compile = Command::new("cc")
        .arg(&src)
        .arg(&staticlib)
        .arg("-I")
        .arg(&include)
        .args([
            "-std=c99",
            "-Wall",
            "-Werror",
            "-lpthread",
            "-ldl",
            "-lm",
            "-o",
        ])
        .arg(&bin)
        .output()
        .expect("cc runs");
    assert!(
        compile.status.success(),
        "cc failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&bin).output().expect("program runs");
    assert!(
        run.status.success(),
        "exit {:?}, stderr: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&run.stdout), "ok\n");
}
