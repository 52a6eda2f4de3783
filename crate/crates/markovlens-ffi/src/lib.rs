//! C ABI for markovlens. Opaque handles own the Rust state; every function
//! returns an `MlvStatus` and reports details through a thread-local error
//! message readable with `mlv_last_error_message`.
//!
//! Conventions:
//! - Out-parameters are written only on `MLV_STATUS_OK`.
//! - Handles are freed exactly once with their matching `_free` function;
//!   passing NULL to a `_free` is a no-op.
//! - Panel data is row-major with time as the slow axis: element
//!   `data[t * n_vars + j]` is variable `j` at step `t`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use markovlens::env::{make_env, Action, ActionSpace, Environment};
use markovlens::mvs::{compute_mvs, MvsConfig};
use markovlens::pcmci::{run_pcmci, PcmciResult, TimeSeriesPanel};
use ndarray::Array2;

/// Result code for every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlvStatus {
    /// Success; out-parameters are valid.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// An argument failed validation (bad name, bad shape, out of range).
    InvalidArgument = 2,
    /// The operation itself failed; see `mlv_last_error_message`.
    Runtime = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Runs `body` behind a panic guard so unwinding never crosses the ABI.
fn guarded(body: impl FnOnce() -> MlvStatus) -> MlvStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            MlvStatus::Runtime
        }
    }
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread. Never NULL.
#[no_mangle]
pub extern "C" fn mlv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mlv_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// An owned simulation environment (CartPole-v1, Pendulum-v1, or Acrobot-v1).
pub struct MlvEnv {
    inner: Box<dyn Environment>,
}

/// One step's scalar results; observations are returned separately.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MlvStep {
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

unsafe fn write_observation(
    obs: &[f64],
    obs_out: *mut f64,
    obs_capacity: usize,
) -> MlvStatus {
    if obs_out.is_null() {
        set_error("obs_out is NULL");
        return MlvStatus::NullPointer;
    }
    if obs_capacity < obs.len() {
        set_error(&format!(
            "obs_out capacity {} is below the observation dimension {}",
            obs_capacity,
            obs.len()
        ));
        return MlvStatus::InvalidArgument;
    }
    unsafe { std::ptr::copy_nonoverlapping(obs.as_ptr(), obs_out, obs.len()) };
    MlvStatus::Ok
}

/// Creates an environment by name ("CartPole-v1", "Pendulum-v1",
/// "Acrobot-v1"). On success writes a handle to `out`; free it with
/// `mlv_env_free`.
///
/// # Safety
/// `name` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mlv_env_new(name: *const c_char, out: *mut *mut MlvEnv) -> MlvStatus {
    guarded(|| {
        if name.is_null() || out.is_null() {
            set_error("name or out is NULL");
            return MlvStatus::NullPointer;
        }
        let name = match unsafe { CStr::from_ptr(name) }.to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("name is not valid UTF-8");
                return MlvStatus::InvalidArgument;
            }
        };
        match make_env(name) {
            Ok(inner) => {
                unsafe { out.write(Box::into_raw(Box::new(MlvEnv { inner }))) };
                MlvStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                MlvStatus::InvalidArgument
            }
        }
    })
}

/// Destroys an environment handle. NULL is a no-op.
///
/// # Safety
/// `env` must be a handle from `mlv_env_new` that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn mlv_env_free(env: *mut MlvEnv) {
    if !env.is_null() {
        drop(unsafe { Box::from_raw(env) });
    }
}

/// Writes the environment's observation dimension to `out`.
///
/// # Safety
/// `env` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mlv_env_observation_dim(
    env: *const MlvEnv,
    out: *mut usize,
) -> MlvStatus {
    guarded(|| {
        if env.is_null() || out.is_null() {
            set_error("env or out is NULL");
            return MlvStatus::NullPointer;
        }
        unsafe { out.write((*env).inner.observation_dim()) };
        MlvStatus::Ok
    })
}

/// Writes 1 to `out` if the action space is discrete (actions are indices
/// passed to `mlv_env_step_discrete`), 0 if continuous (torques passed to
/// `mlv_env_step_continuous`).
///
/// # Safety
/// `env` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mlv_env_action_space_is_discrete(
    env: *const MlvEnv,
    out: *mut i32,
) -> MlvStatus {
    guarded(|| {
        if env.is_null() || out.is_null() {
            set_error("env or out is NULL");
            return MlvStatus::NullPointer;
        }
        let discrete = match unsafe { &*env }.inner.action_space() {
            ActionSpace::Discrete(_) => 1,
            ActionSpace::Continuous { .. } => 0,
        };
        unsafe { out.write(discrete) };
        MlvStatus::Ok
    })
}

/// Starts a new episode from a fresh RNG seeded with `seed` and writes the
/// initial observation into `obs_out` (capacity `obs_capacity` doubles).
///
/// # Safety
/// `env` must be a live handle; `obs_out` must point to at least
/// `obs_capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn mlv_env_reset_seeded(
    env: *mut MlvEnv,
    seed: u64,
    obs_out: *mut f64,
    obs_capacity: usize,
) -> MlvStatus {
    guarded(|| {
        if env.is_null() {
            set_error("env is NULL");
            return MlvStatus::NullPointer;
        }
        let obs = unsafe { &mut *env }.inner.reset(Some(seed));
        unsafe { write_observation(&obs, obs_out, obs_capacity) }
    })
}

/// Starts a new episode drawing the initial state from the environment's
/// current RNG stream.
///
/// # Safety
/// Same contract as `mlv_env_reset_seeded`.
#[no_mangle]
pub unsafe extern "C" fn mlv_env_reset(
    env: *mut MlvEnv,
    obs_out: *mut f64,
    obs_capacity: usize,
) -> MlvStatus {
    guarded(|| {
        if env.is_null() {
            set_error("env is NULL");
            return MlvStatus::NullPointer;
        }
        let obs = unsafe { &mut *env }.inner.reset(None);
        unsafe { write_observation(&obs, obs_out, obs_capacity) }
    })
}

/// Overwrites the environment's internal state vector (the diagnostic layout,
/// not the observation; CartPole and Acrobot use 4 values, Pendulum 2).
/// Episode bookkeeping is untouched.
///
/// # Safety
/// `env` must be a live handle; `state` must point to `state_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mlv_env_set_state(
    env: *mut MlvEnv,
    state: *const f64,
    state_len: usize,
) -> MlvStatus {
    guarded(|| {
        if env.is_null() || state.is_null() {
            set_error("env or state is NULL");
            return MlvStatus::NullPointer;
        }
        let values = unsafe { std::slice::from_raw_parts(state, state_len) };
        match unsafe { &mut *env }.inner.set_state(values) {
            Ok(()) => MlvStatus::Ok,
            Err(e) => {
                set_error(&e.to_string());
                MlvStatus::InvalidArgument
            }
        }
    })
}

unsafe fn step_impl(
    env: *mut MlvEnv,
    action: Action,
    obs_out: *mut f64,
    obs_capacity: usize,
    step_out: *mut MlvStep,
) -> MlvStatus {
    if env.is_null() || step_out.is_null() {
        set_error("env or step_out is NULL");
        return MlvStatus::NullPointer;
    }
    match unsafe { &mut *env }.inner.step(action) {
        Ok(outcome) => {
            let status = unsafe { write_observation(&outcome.observation, obs_out, obs_capacity) };
            if status != MlvStatus::Ok {
                return status;
            }
            unsafe {
                step_out.write(MlvStep {
                    reward: outcome.reward,
                    terminated: outcome.terminated,
                    truncated: outcome.truncated,
                })
            };
            MlvStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            MlvStatus::Runtime
        }
    }
}

/// Advances a discrete-action environment by one step. Stepping a finished
/// episode or passing an out-of-range action fails with `MLV_STATUS_RUNTIME`.
///
/// # Safety
/// `env` must be a live handle; `obs_out` must hold `obs_capacity` doubles;
/// `step_out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mlv_env_step_discrete(
    env: *mut MlvEnv,
    action: usize,
    obs_out: *mut f64,
    obs_capacity: usize,
    step_out: *mut MlvStep,
) -> MlvStatus {
    guarded(|| unsafe { step_impl(env, Action::Discrete(action), obs_out, obs_capacity, step_out) })
}

/// Advances a continuous-action environment by one step.
///
/// # Safety
/// Same contract as `mlv_env_step_discrete`.
#[no_mangle]
pub unsafe extern "C" fn mlv_env_step_continuous(
    env: *mut MlvEnv,
    action: f64,
    obs_out: *mut f64,
    obs_capacity: usize,
    step_out: *mut MlvStep,
) -> MlvStatus {
    guarded(|| unsafe {
        step_impl(env, Action::Continuous(action), obs_out, obs_capacity, step_out)
    })
}

/// A completed PCMCI analysis of one panel.
pub struct MlvPcmci {
    result: PcmciResult,
    n_vars: usize,
}

/// Runs PCMCI (PC1 parent selection + MCI partial-correlation tests) on a
/// row-major panel of `n_steps` x `n_vars` doubles. On success writes a
/// handle to `out`; free it with `mlv_pcmci_free`.
///
/// # Safety
/// `data` must point to `n_steps * n_vars` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mlv_pcmci_run(
    data: *const f64,
    n_steps: usize,
    n_vars: usize,
    tau_max: usize,
    alpha: f64,
    out: *mut *mut MlvPcmci,
) -> MlvStatus {
    guarded(|| {
        if data.is_null() || out.is_null() {
            set_error("data or out is NULL");
            return MlvStatus::NullPointer;
        }
        if n_steps == 0 || n_vars == 0 {
            set_error("n_steps and n_vars must be positive");
            return MlvStatus::InvalidArgument;
        }
        let Some(len) = n_steps.checked_mul(n_vars) else {
            set_error("n_steps * n_vars overflows");
            return MlvStatus::InvalidArgument;
        };
        let values = unsafe { std::slice::from_raw_parts(data, len) }.to_vec();
        let array = match Array2::from_shape_vec((n_steps, n_vars), values) {
            Ok(a) => a,
            Err(e) => {
                set_error(&e.to_string());
                return MlvStatus::InvalidArgument;
            }
        };
        let names = (0..n_vars).map(|j| format!("x{j}")).collect();
        let outcome = TimeSeriesPanel::new(array, names)
            .and_then(|panel| run_pcmci(&panel, tau_max, alpha, 0));
        match outcome {
            Ok(result) => {
                unsafe { out.write(Box::into_raw(Box::new(MlvPcmci { result, n_vars }))) };
                MlvStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                MlvStatus::Runtime
            }
        }
    })
}

/// Destroys a PCMCI handle. NULL is a no-op.
///
/// # Safety
/// `pcmci` must be a handle from `mlv_pcmci_run` that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn mlv_pcmci_free(pcmci: *mut MlvPcmci) {
    if !pcmci.is_null() {
        drop(unsafe { Box::from_raw(pcmci) });
    }
}

/// Writes the analyzed panel's variable count to `out`.
///
/// # Safety
/// `pcmci` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mlv_pcmci_n_vars(pcmci: *const MlvPcmci, out: *mut usize) -> MlvStatus {
    guarded(|| {
        if pcmci.is_null() || out.is_null() {
            set_error("pcmci or out is NULL");
            return MlvStatus::NullPointer;
        }
        unsafe { out.write((*pcmci).n_vars) };
        MlvStatus::Ok
    })
}

/// Writes the analysis tau_max to `out`.
///
/// # Safety
/// `pcmci` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mlv_pcmci_tau_max(pcmci: *const MlvPcmci, out: *mut usize) -> MlvStatus {
    guarded(|| {
        if pcmci.is_null() || out.is_null() {
            set_error("pcmci or out is NULL");
            return MlvStatus::NullPointer;
        }
        unsafe { out.write((*pcmci).result.tau_max) };
        MlvStatus::Ok
    })
}

unsafe fn link_cell(
    pcmci: *const MlvPcmci,
    source: usize,
    target: usize,
    lag: usize,
) -> Result<(usize, usize, usize), MlvStatus> {
    let handle = unsafe { &*pcmci };
    if source >= handle.n_vars || target >= handle.n_vars || lag > handle.result.tau_max {
        set_error(&format!(
            "link index out of range: source {source}, target {target}, lag {lag} \
             (n_vars {}, tau_max {})",
            handle.n_vars, handle.result.tau_max
        ));
        return Err(MlvStatus::InvalidArgument);
    }
    Ok((source, target, lag))
}

/// Writes the MCI partial correlation for source -> target at `lag` steps in
/// the past (lag 0 is contemporaneous).
///
/// # Safety
/// `pcmci` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mlv_pcmci_val(
    pcmci: *const MlvPcmci,
    source: usize,
    target: usize,
    lag: usize,
    out: *mut f64,
) -> MlvStatus {
    guarded(|| {
        if pcmci.is_null() || out.is_null() {
            set_error("pcmci or out is NULL");
            return MlvStatus::NullPointer;
        }
        match unsafe { link_cell(pcmci, source, target, lag) } {
            Ok((i, j, k)) => {
                let handle = unsafe { &*pcmci };
                unsafe { out.write(handle.result.val[[i, j, k]]) };
                MlvStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Writes the MCI p-value for source -> target at `lag`.
///
/// # Safety
/// `pcmci` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mlv_pcmci_pvalue(
    pcmci: *const MlvPcmci,
    source: usize,
    target: usize,
    lag: usize,
    out: *mut f64,
) -> MlvStatus {
    guarded(|| {
        if pcmci.is_null() || out.is_null() {
            set_error("pcmci or out is NULL");
            return MlvStatus::NullPointer;
        }
        match unsafe { link_cell(pcmci, source, target, lag) } {
            Ok((i, j, k)) => {
                let handle = unsafe { &*pcmci };
                unsafe { out.write(handle.result.p[[i, j, k]]) };
                MlvStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Computes the Markov Violation Score of an analyzed panel. `alpha` is the
/// significance level for counting a link; `p_floor` caps the -ln p weight
/// (pass 0 for the default 1e-10). Writes the score to `score_out` and the
/// number of contributing links to `links_out` (NULL to skip the count).
///
/// # Safety
/// `pcmci` must be a live handle; `score_out` must be a valid pointer;
/// `links_out` is optional.
#[no_mangle]
pub unsafe extern "C" fn mlv_mvs_compute(
    pcmci: *const MlvPcmci,
    alpha: f64,
    p_floor: f64,
    score_out: *mut f64,
    links_out: *mut usize,
) -> MlvStatus {
    guarded(|| {
        if pcmci.is_null() || score_out.is_null() {
            set_error("pcmci or score_out is NULL");
            return MlvStatus::NullPointer;
        }
        let handle = unsafe { &*pcmci };
        let config = MvsConfig {
            tau_max: handle.result.tau_max,
            alpha_level: alpha,
            p_floor: if p_floor == 0.0 {
                MvsConfig::default().p_floor
            } else {
                p_floor
            },
        };
        match compute_mvs(&handle.result, &config) {
            Ok(report) => {
                unsafe { score_out.write(report.score) };
                if !links_out.is_null() {
                    unsafe { links_out.write(report.contributions.len()) };
                }
                MlvStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                MlvStatus::Runtime
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_panel(n_steps: usize, n_vars: usize) -> Vec<f64> {
        let mut state = 0x2545f4914f6cdd1d_u64;
        let mut uniform = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut data = vec![0.0; n_steps * n_vars];
        for t in 1..n_steps {
            for j in 0..n_vars {
                let prev = data[(t - 1) * n_vars + j];
                data[t * n_vars + j] = 0.6 * prev + uniform();
            }
        }
        data
    }

    #[test]
    fn version_is_a_semver_string() {
        let version = unsafe { CStr::from_ptr(mlv_version()) }.to_str().unwrap();
        assert_eq!(version.split('.').count(), 3);
    }

    #[test]
    fn env_roundtrip_and_error_paths() {
        let mut env: *mut MlvEnv = std::ptr::null_mut();
        let name = CString::new("CartPole-v1").unwrap();
        assert_eq!(unsafe { mlv_env_new(name.as_ptr(), &mut env) }, MlvStatus::Ok);

        let mut dim = 0usize;
        assert_eq!(unsafe { mlv_env_observation_dim(env, &mut dim) }, MlvStatus::Ok);
        assert_eq!(dim, 4);

        let mut discrete = -1i32;
        assert_eq!(
            unsafe { mlv_env_action_space_is_discrete(env, &mut discrete) },
            MlvStatus::Ok
        );
        assert_eq!(discrete, 1);

        let mut obs = vec![f64::NAN; dim];
        assert_eq!(
            unsafe { mlv_env_reset_seeded(env, 7, obs.as_mut_ptr(), obs.len()) },
            MlvStatus::Ok
        );
        assert!(obs.iter().all(|v| v.is_finite() && v.abs() <= 0.05));

        let mut step = MlvStep { reward: 0.0, terminated: false, truncated: false };
        assert_eq!(
            unsafe { mlv_env_step_discrete(env, 0, obs.as_mut_ptr(), obs.len(), &mut step) },
            MlvStatus::Ok
        );
        assert_eq!(step.reward, 1.0);

        let state = [0.0, 0.0, 0.1, 0.0];
        assert_eq!(
            unsafe { mlv_env_set_state(env, state.as_ptr(), state.len()) },
            MlvStatus::Ok
        );
        assert_eq!(
            unsafe { mlv_env_set_state(env, state.as_ptr(), 2) },
            MlvStatus::InvalidArgument
        );

        let tight: MlvStatus =
            unsafe { mlv_env_reset_seeded(env, 7, obs.as_mut_ptr(), dim - 1) };
        assert_eq!(tight, MlvStatus::InvalidArgument);

        assert_eq!(
            unsafe { mlv_env_step_continuous(env, 0.5, obs.as_mut_ptr(), obs.len(), &mut step) },
            MlvStatus::Runtime
        );
        let message = unsafe { CStr::from_ptr(mlv_last_error_message()) }
            .to_str()
            .unwrap();
        assert!(!message.is_empty());

        unsafe { mlv_env_free(env) };

        let bad_name = CString::new("MountainCar-v0").unwrap();
        let mut dangling: *mut MlvEnv = std::ptr::null_mut();
        assert_eq!(
            unsafe { mlv_env_new(bad_name.as_ptr(), &mut dangling) },
            MlvStatus::InvalidArgument
        );
        assert!(dangling.is_null());
        assert_eq!(
            unsafe { mlv_env_new(std::ptr::null(), &mut dangling) },
            MlvStatus::NullPointer
        );
    }

    #[test]
    fn pcmci_matches_the_library_call() {
        let (n_steps, n_vars, tau_max, alpha) = (300, 3, 3, 0.05);
        let data = lcg_panel(n_steps, n_vars);

        let mut handle: *mut MlvPcmci = std::ptr::null_mut();
        let status = unsafe {
            mlv_pcmci_run(data.as_ptr(), n_steps, n_vars, tau_max, alpha, &mut handle)
        };
        assert_eq!(status, MlvStatus::Ok);

        let array = Array2::from_shape_vec((n_steps, n_vars), data).unwrap();
        let names = (0..n_vars).map(|j| format!("x{j}")).collect();
        let panel = TimeSeriesPanel::new(array, names).unwrap();
        let direct = run_pcmci(&panel, tau_max, alpha, 0).unwrap();

        for i in 0..n_vars {
            for j in 0..n_vars {
                for k in 0..=tau_max {
                    let (mut val, mut p) = (f64::NAN, f64::NAN);
                    assert_eq!(
                        unsafe { mlv_pcmci_val(handle, i, j, k, &mut val) },
                        MlvStatus::Ok
                    );
                    assert_eq!(
                        unsafe { mlv_pcmci_pvalue(handle, i, j, k, &mut p) },
                        MlvStatus::Ok
                    );
                    assert_eq!(val, direct.val[[i, j, k]]);
                    assert_eq!(p, direct.p[[i, j, k]]);
                }
            }
        }

        let (mut score, mut links) = (f64::NAN, usize::MAX);
        assert_eq!(
            unsafe { mlv_mvs_compute(handle, alpha, 0.0, &mut score, &mut links) },
            MlvStatus::Ok
        );
        let report = compute_mvs(&direct, &MvsConfig { tau_max, alpha_level: alpha, p_floor: 1e-10 })
            .unwrap();
        assert_eq!(score, report.score);
        assert_eq!(links, report.contributions.len());

        let mut val = f64::NAN;
        assert_eq!(
            unsafe { mlv_pcmci_val(handle, n_vars, 0, 0, &mut val) },
            MlvStatus::InvalidArgument
        );
        assert_eq!(
            unsafe { mlv_pcmci_val(handle, 0, 0, tau_max + 1, &mut val) },
            MlvStatus::InvalidArgument
        );
        unsafe { mlv_pcmci_free(handle) };

        let mut rejected: *mut MlvPcmci = std::ptr::null_mut();
        let tiny = vec![0.0; 6];
        assert_eq!(
            unsafe { mlv_pcmci_run(tiny.as_ptr(), 3, 2, 2, alpha, &mut rejected) },
            MlvStatus::Runtime
        );
        assert!(rejected.is_null());
    }
}
