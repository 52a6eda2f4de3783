//! Compiles and runs a C program against the generated header and the
//! staticlib, exercising the ABI end to end with a real C toolchain.

use std::path::PathBuf;
use std::process::Command;

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "markovlens.h"

static unsigned long long lcg = 0x2545f4914f6cdd1dULL;
static double uniform(void) {
    lcg = lcg * 6364136223846793005ULL + 1442695040888963407ULL;
    return (double)(lcg >> 11) / 9007199254740992.0 - 0.5;
}

int main(void) {
    if (strlen(mlv_version()) == 0) return 1;

    MlvEnv *env = NULL;
    if (mlv_env_new("CartPole-v1", &env) != MLV_STATUS_OK) return 2;
    size_t dim = 0;
    if (mlv_env_observation_dim(env, &dim) != MLV_STATUS_OK || dim != 4) return 3;

    double obs[4];
    if (mlv_env_reset_seeded(env, 42, obs, 4) != MLV_STATUS_OK) return 4;
    double total = 0.0;
    for (int i = 0; i < 20; i++) {
        MlvStep step;
        if (mlv_env_step_discrete(env, i % 2, obs, 4, &step) != MLV_STATUS_OK) return 5;
        total += step.reward;
        if (step.terminated || step.truncated) {
            if (mlv_env_reset(env, obs, 4) != MLV_STATUS_OK) return 6;
        }
    }
    if (total != 20.0) return 7;
    if (mlv_env_new("NoSuchEnv-v0", &env) != MLV_STATUS_INVALID_ARGUMENT) return 8;
    if (strlen(mlv_last_error_message()) == 0) return 9;
    mlv_env_free(env);

    enum { T = 240, N = 2, TAU = 2 };
    static double panel[T * N];
    for (int t = 1; t < T; t++)
        for (int j = 0; j < N; j++)
            panel[t * N + j] = 0.5 * panel[(t - 1) * N + j] + uniform();

    MlvPcmci *pcmci = NULL;
    if (mlv_pcmci_run(panel, T, N, TAU, 0.05, &pcmci) != MLV_STATUS_OK) return 10;
    size_t n_vars = 0, tau_max = 0;
    mlv_pcmci_n_vars(pcmci, &n_vars);
    mlv_pcmci_tau_max(pcmci, &tau_max);
    if (n_vars != N || tau_max != TAU) return 11;

    double val = 0.0, p = 2.0;
    if (mlv_pcmci_val(pcmci, 0, 0, 1, &val) != MLV_STATUS_OK) return 12;
    if (mlv_pcmci_pvalue(pcmci, 0, 0, 1, &p) != MLV_STATUS_OK) return 13;
    if (!(fabs(val) <= 1.0) || !(p >= 0.0 && p <= 1.0)) return 14;
    if (mlv_pcmci_val(pcmci, N, 0, 0, &val) != MLV_STATUS_INVALID_ARGUMENT) return 15;

    double score = -1.0;
    size_t links = 0;
    if (mlv_mvs_compute(pcmci, 0.05, 0.0, &score, &links) != MLV_STATUS_OK) return 16;
    if (!(score >= 0.0)) return 17;
    mlv_pcmci_free(pcmci);

    printf("val(0,0,1)=%.6f p=%.6f mvs=%.6f links=%zu\n", val, p, score, links);
    return 0;
}
"#;

fn target_profile_dir() -> PathBuf {
    // target/<profile>/deps/<test-bin> -> target/<profile>
    let mut dir = std::env::current_exe().expect("test binary path");
    dir.pop();
    if dir.ends_with("deps") {
        dir.pop();
    }
    dir
}

#[test]
fn c_program_links_and_runs() {
    let profile_dir = target_profile_dir();
    let staticlib = profile_dir.join("libmarkovlens_ffi.a");
    assert!(
        staticlib.exists(),
        "staticlib not found at {}",
        staticlib.display()
    );
    let include_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let work_dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    std::fs::create_dir_all(&work_dir).unwrap();
    let source = work_dir.join("smoke.c");
    let binary = work_dir.join("smoke");
    std::fs::write(&source, C_PROGRAM).unwrap();

    let compile = Command::new("cc")
        .arg(&source)
        .arg("-I")
        .arg(&include_dir)
        .arg(&staticlib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&binary)
        .output()
        .expect("cc not available");
    assert!(
        compile.status.success(),
        "compile failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&binary).output().expect("smoke binary runs");
    assert!(
        run.status.success(),
        "smoke exited with {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stdout)
    );
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("mvs="), "unexpected output: {stdout}");
}
