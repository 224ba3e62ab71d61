//! C ABI over `chronoskill`.
//!
//! Every fallible function returns a [`CsStatus`]; on failure the message is
//! available from [`cs_last_error`] on the same thread. Handles are opaque
//! and owned by the caller until passed to their `_free` function. Panics
//! never cross the boundary; they surface as `CS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use chronoskill::envs::{env_reset, EnvName, EnvSpec, EnvState};
use chronoskill::harness::{evaluate, load_checkpoint, run_training, RunConfig};
use chronoskill::policy::{select_head, Policy};
use chronoskill::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Usage = 4,
    Numeric = 5,
    Format = 6,
    UnsupportedVersion = 7,
    Io = 8,
    Panic = 9,
}

impl From<&Error> for CsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension(_) => CsStatus::Dimension,
            Error::Argument(_) => CsStatus::InvalidArgument,
            Error::Usage(_) => CsStatus::Usage,
            Error::Numeric(_) => CsStatus::Numeric,
            Error::Format { .. } => CsStatus::Format,
            Error::UnsupportedVersion(_) => CsStatus::UnsupportedVersion,
            Error::Io { .. } => CsStatus::Io,
        }
    }
}

struct Failure(CsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(CsStatus::from(&e), e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            CsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> FfiResult<&'a [f64]> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> FfiResult<&'a mut [f64]> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn string(p: *const c_char, what: &str) -> FfiResult<String> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure(CsStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn expect_len(what: &str, got: usize, want: usize) -> FfiResult<()> {
    if got == want {
        Ok(())
    } else {
        Err(Failure(
            CsStatus::Dimension,
            format!("{what}: length {got}, expected {want}"),
        ))
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Head index `floor(t * heads / horizon)` for time step `t`.
///
/// # Safety
/// `head` must be a valid pointer to writable memory.
#[no_mangle]
pub unsafe extern "C" fn cs_select_head(t: usize, horizon: usize, heads: usize, head: *mut usize) -> CsStatus {
    guard(|| {
        let head = out(head, "head")?;
        *head = select_head(t, horizon, heads)?;
        Ok(())
    })
}

/// An environment instance. Create with [`cs_env_new`], release with [`cs_env_free`].
pub struct CsEnv {
    spec: EnvSpec,
    state: Option<EnvState>,
}

/// Creates an environment by name (`push-lite`, `pick-place-lite`,
/// `lid-close-lite`, `two-phase-probe`). Call [`cs_env_reset`] before stepping.
///
/// # Safety
/// `name` must be a NUL-terminated string and `env` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_env_new(name: *const c_char, env: *mut *mut CsEnv) -> CsStatus {
    guard(|| {
        let env = out(env, "env")?;
        let name: EnvName = string(name, "name")?.parse()?;
        *env = Box::into_raw(Box::new(CsEnv {
            spec: name.spec(),
            state: None,
        }));
        Ok(())
    })
}

/// # Safety
/// `env` must come from [`cs_env_new`]; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cs_env_dims(
    env: *const CsEnv,
    obs_dim: *mut usize,
    action_dim: *mut usize,
    horizon: *mut usize,
) -> CsStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        *out(obs_dim, "obs_dim")? = env.spec.obs_dim;
        *out(action_dim, "action_dim")? = env.spec.action_dim;
        *out(horizon, "horizon")? = env.spec.horizon;
        Ok(())
    })
}

/// Starts an episode from reset seed `seed` and writes the first observation.
///
/// # Safety
/// `env` must come from [`cs_env_new`]; `obs` must point to `obs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cs_env_reset(env: *mut CsEnv, seed: u64, obs: *mut f64, obs_len: usize) -> CsStatus {
    guard(|| {
        let env = out(env, "env")?;
        expect_len("obs", obs_len, env.spec.obs_dim)?;
        let obs = slice_mut(obs, obs_len, "obs")?;
        let (state, first) = env_reset(&env.spec, seed);
        obs.copy_from_slice(&first);
        env.state = Some(state);
        Ok(())
    })
}

/// Applies one action (clipped to the action box) and writes the next
/// observation and outcome. Stepping past the horizon is a usage error.
///
/// # Safety
/// `env` must come from [`cs_env_new`]; `action` must point to `action_len`
/// doubles, `obs` to `obs_len` doubles; the remaining pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cs_env_step(
    env: *mut CsEnv,
    action: *const f64,
    action_len: usize,
    obs: *mut f64,
    obs_len: usize,
    reward: *mut f64,
    terminal: *mut bool,
    success: *mut bool,
) -> CsStatus {
    guard(|| {
        let env = out(env, "env")?;
        expect_len("obs", obs_len, env.spec.obs_dim)?;
        let action = slice(action, action_len, "action")?;
        let (obs, reward) = (slice_mut(obs, obs_len, "obs")?, out(reward, "reward")?);
        let (terminal, success) = (out(terminal, "terminal")?, out(success, "success")?);
        let state = env
            .state
            .as_mut()
            .ok_or_else(|| Failure(CsStatus::Usage, "cs_env_step before cs_env_reset".into()))?;
        let step = state.step(action)?;
        obs.copy_from_slice(&step.observation);
        *reward = step.reward;
        *terminal = step.terminal;
        *success = step.success;
        Ok(())
    })
}

/// # Safety
/// `env` must come from [`cs_env_new`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cs_env_free(env: *mut CsEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// A trained policy loaded from a checkpoint.
pub struct CsPolicy {
    policy: Policy,
}

/// # Safety
/// `path` must be a NUL-terminated string and `policy` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_policy_load(path: *const c_char, policy: *mut *mut CsPolicy) -> CsStatus {
    guard(|| {
        let policy = out(policy, "policy")?;
        let (loaded, _) = load_checkpoint(&PathBuf::from(string(path, "path")?))?;
        *policy = Box::into_raw(Box::new(CsPolicy { policy: loaded }));
        Ok(())
    })
}

/// # Safety
/// `policy` must come from [`cs_policy_load`]; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cs_policy_dims(
    policy: *const CsPolicy,
    obs_dim: *mut usize,
    action_dim: *mut usize,
    heads: *mut usize,
    horizon: *mut usize,
) -> CsStatus {
    guard(|| {
        let c = policy.as_ref().ok_or_else(|| null("policy"))?.policy.config();
        *out(obs_dim, "obs_dim")? = c.obs_dim;
        *out(action_dim, "action_dim")? = c.action_dim;
        *out(heads, "heads")? = c.heads;
        *out(horizon, "horizon")? = c.horizon;
        Ok(())
    })
}

/// Deterministic action (the distribution mean) for observation `obs` at
/// time `t`. `head` receives the head used and may be NULL.
///
/// # Safety
/// `policy` must come from [`cs_policy_load`]; `obs` must point to `obs_len`
/// doubles and `action` to `action_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cs_policy_act(
    policy: *const CsPolicy,
    obs: *const f64,
    obs_len: usize,
    t: usize,
    action: *mut f64,
    action_len: usize,
    head: *mut usize,
) -> CsStatus {
    guard(|| {
        let policy = &policy.as_ref().ok_or_else(|| null("policy"))?.policy;
        expect_len("action", action_len, policy.config().action_dim)?;
        let obs = slice(obs, obs_len, "obs")?;
        let action = slice_mut(action, action_len, "action")?;
        let dist = policy.forward(obs, t)?;
        action.copy_from_slice(&dist.mean);
        if let Some(h) = head.as_mut() {
            *h = dist.head;
        }
        Ok(())
    })
}

/// # Safety
/// `policy` must come from [`cs_policy_load`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cs_policy_free(policy: *mut CsPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Runs the training described by a config file, writing artifacts to its
/// output directory. Final evaluation figures are written to the optional
/// (nullable) outputs.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; output pointers must be
/// valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn cs_train(
    config_path: *const c_char,
    mean_return: *mut f64,
    success_rate: *mut f64,
) -> CsStatus {
    guard(|| {
        let config = RunConfig::load(&PathBuf::from(string(config_path, "config_path")?))?;
        let report = run_training(&config)?.final_report;
        if let Some(r) = mean_return.as_mut() {
            *r = report.mean_return;
        }
        if let Some(s) = success_rate.as_mut() {
            *s = report.success_rate;
        }
        Ok(())
    })
}

/// Evaluates a checkpoint on `episodes` mean-action episodes with reset
/// seeds `base_seed..base_seed + episodes`.
///
/// # Safety
/// `checkpoint` and `env` must be NUL-terminated strings; output pointers
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn cs_evaluate(
    checkpoint: *const c_char,
    env: *const c_char,
    episodes: usize,
    base_seed: u64,
    mean_return: *mut f64,
    success_rate: *mut f64,
) -> CsStatus {
    guard(|| {
        let path = PathBuf::from(string(checkpoint, "checkpoint")?);
        let name: EnvName = string(env, "env")?.parse()?;
        let (mean_return, success_rate) = (out(mean_return, "mean_return")?, out(success_rate, "success_rate")?);
        let report = evaluate(&path, &name.spec(), episodes, base_seed)?;
        *mean_return = report.mean_return;
        *success_rate = report.success_rate;
        Ok(())
    })
}
