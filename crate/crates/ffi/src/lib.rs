//! C ABI over `aoi-core`.
//!
//! Handles are opaque and owned by the caller once created; free each with
//! its matching `*_free`. Every fallible call returns an [`AoiStatus`] and,
//! on failure, leaves a message readable through [`aoi_last_error_message`]
//! on the same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use aoi_core::game::{contraction_bound, solve_ne};
use aoi_core::learning::{LearningRun, Mode};
use aoi_core::welfare::{price_of_anarchy, system_utility};
use aoi_core::{derive_params, Error, GameConfig, NodeParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AoiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoConvergence = 3,
    /// The caller's output buffer does not match the node count.
    BufferLength = 4,
    Panic = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AoiMode {
    Stochastic = 0,
    Expected = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoiNodeParams {
    pub cost_per_transmission: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub p_min: f64,
    pub alpha: f64,
}

impl From<NodeParams> for AoiNodeParams {
    fn from(p: NodeParams) -> Self {
        Self {
            cost_per_transmission: p.cost_per_transmission,
            rho1: p.rho1,
            rho2: p.rho2,
            p_min: p.p_min,
            alpha: p.alpha,
        }
    }
}

/// A game: roster, frame length, schedule and seed.
pub struct AoiGame {
    config: GameConfig,
}

/// A learning run advanced frame by frame.
pub struct AoiLearning {
    run: LearningRun,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> AoiStatus {
    match err {
        Error::NoConvergence { .. } | Error::NotBracketed { .. } => AoiStatus::NoConvergence,
        Error::Io { .. } | Error::Table { .. } | Error::Scenario { .. } => AoiStatus::Internal,
        _ => AoiStatus::InvalidArgument,
    }
}

fn fail(status: AoiStatus, message: impl Into<String>) -> AoiStatus {
    set_error(message.into());
    status
}

/// Runs `body`, turning errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), AoiStatus>) -> AoiStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => AoiStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(AoiStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn check<T>(result: aoi_core::Result<T>) -> Result<T, AoiStatus> {
    result.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, AoiStatus> {
    ptr.as_ref()
        .ok_or_else(|| fail(AoiStatus::NullPointer, format!("{what} is null")))
}

unsafe fn deref_mut<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, AoiStatus> {
    ptr.as_mut()
        .ok_or_else(|| fail(AoiStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_slice<'a>(
    ptr: *mut f64,
    len: usize,
    expected: usize,
) -> Result<&'a mut [f64], AoiStatus> {
    if ptr.is_null() {
        return Err(fail(AoiStatus::NullPointer, "output buffer is null"));
    }
    if len != expected {
        return Err(fail(
            AoiStatus::BufferLength,
            format!("buffer holds {len} values but {expected} are produced"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

/// Message describing the last failure on this thread, or null. The string
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn aoi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Node parameters derived from a transmission cost and the global floor
/// `p_global_min` in (0, 0.5).
///
/// # Safety
/// `out` must be null or point to writable memory for one `AoiNodeParams`.
#[no_mangle]
pub unsafe extern "C" fn aoi_derive_params(
    cost: f64,
    p_global_min: f64,
    out: *mut AoiNodeParams,
) -> AoiStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = check(derive_params(cost, p_global_min))?.into();
        Ok(())
    })
}

/// Creates a game with `n` identical nodes.
///
/// # Safety
/// `out` must be null or point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn aoi_game_new_homogeneous(
    n: usize,
    cost: f64,
    p_global_min: f64,
    frame_length: usize,
    seed: u64,
    out: *mut *mut AoiGame,
) -> AoiStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let config = check(GameConfig::homogeneous(n, cost, p_global_min))?
            .with_frame_length(frame_length)
            .with_seed(seed);
        check(config.validate())?;
        *out = Box::into_raw(Box::new(AoiGame { config }));
        Ok(())
    })
}

/// # Safety
/// `game` must be null or a handle from [`aoi_game_new_homogeneous`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn aoi_game_free(game: *mut AoiGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `game` must be null or a live game handle.
#[no_mangle]
pub unsafe extern "C" fn aoi_game_node_count(game: *const AoiGame) -> usize {
    game.as_ref().map_or(0, |g| g.config.nodes.len())
}

/// Certified bound on the best-response map's Lipschitz constant.
///
/// # Safety
/// `game` must be null or a live game handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn aoi_game_contraction_bound(
    game: *const AoiGame,
    out: *mut f64,
) -> AoiStatus {
    guard(|| {
        let g = deref(game, "game")?;
        let out = deref_mut(out, "out")?;
        let c = &g.config;
        *out = contraction_bound(c.nodes.len(), &c.nodes, c.p_global_min);
        Ok(())
    })
}

/// Writes the Nash equilibrium into `out[0..len]`; `len` must equal the
/// node count.
///
/// # Safety
/// `game` must be null or a live game handle; `out` null or writable for
/// `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn aoi_game_solve_ne(
    game: *const AoiGame,
    tolerance: f64,
    out: *mut f64,
    len: usize,
) -> AoiStatus {
    guard(|| {
        let g = deref(game, "game")?;
        let out = out_slice(out, len, g.config.nodes.len())?;
        if tolerance.is_nan() || tolerance <= 0.0 {
            return Err(fail(
                AoiStatus::InvalidArgument,
                "tolerance must be positive",
            ));
        }
        let ne = check(solve_ne(&g.config, tolerance))?;
        out.copy_from_slice(&ne.probabilities);
        Ok(())
    })
}

/// Social utility at optimum over social utility at equilibrium.
///
/// # Safety
/// `game` must be null or a live game handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn aoi_game_price_of_anarchy(
    game: *const AoiGame,
    out: *mut f64,
) -> AoiStatus {
    guard(|| {
        let g = deref(game, "game")?;
        let out = deref_mut(out, "out")?;
        *out = check(price_of_anarchy(&g.config))?.poa;
        Ok(())
    })
}

/// Sum of node utilities at `profile[0..len]`.
///
/// # Safety
/// `game` must be null or a live game handle; `profile` null or readable
/// for `len` doubles; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn aoi_game_system_utility(
    game: *const AoiGame,
    profile: *const f64,
    len: usize,
    out: *mut f64,
) -> AoiStatus {
    guard(|| {
        let g = deref(game, "game")?;
        let out = deref_mut(out, "out")?;
        if profile.is_null() {
            return Err(fail(AoiStatus::NullPointer, "profile is null"));
        }
        let profile = std::slice::from_raw_parts(profile, len);
        *out = check(system_utility(profile, &g.config.nodes))?;
        Ok(())
    })
}

/// Starts a learning run on a copy of `game`.
///
/// # Safety
/// `game` must be null or a live game handle; `out` null or writable for
/// one pointer.
#[no_mangle]
pub unsafe extern "C" fn aoi_learning_new(
    game: *const AoiGame,
    mode: AoiMode,
    out: *mut *mut AoiLearning,
) -> AoiStatus {
    guard(|| {
        let g = deref(game, "game")?;
        let out = deref_mut(out, "out")?;
        let mode = match mode {
            AoiMode::Stochastic => Mode::Stochastic,
            AoiMode::Expected => Mode::Expected,
        };
        let run = check(LearningRun::new(&g.config, mode))?;
        *out = Box::into_raw(Box::new(AoiLearning { run }));
        Ok(())
    })
}

/// Plays one frame and applies the update.
///
/// # Safety
/// `run` must be null or a live learning handle.
#[no_mangle]
pub unsafe extern "C" fn aoi_learning_step(run: *mut AoiLearning) -> AoiStatus {
    guard(|| {
        let r = deref_mut(run, "run")?;
        check(r.run.step())?;
        Ok(())
    })
}

/// Current roster size, or 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live learning handle.
#[no_mangle]
pub unsafe extern "C" fn aoi_learning_node_count(run: *const AoiLearning) -> usize {
    run.as_ref().map_or(0, |r| r.run.roster().len())
}

/// Copies the current profile into `out[0..len]`.
///
/// # Safety
/// `run` must be null or a live learning handle; `out` null or writable for
/// `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn aoi_learning_probabilities(
    run: *const AoiLearning,
    out: *mut f64,
    len: usize,
) -> AoiStatus {
    guard(|| {
        let r = deref(run, "run")?;
        let profile = r.run.profile();
        out_slice(out, len, profile.len())?.copy_from_slice(profile);
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a handle from [`aoi_learning_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aoi_learning_free(run: *mut AoiLearning) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
