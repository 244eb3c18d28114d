//! C ABI over the `decorr` library.
//!
//! Every function returns a [`DecorrStatus`]; on failure the message is
//! available from [`decorr_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use decorr::commands::with_threads;
use decorr::graphs::Cpdag;
use decorr::io::{read_blocks_tsv, read_dataset, write_edges_tsv};
use decorr::learn::Learner;
use decorr::model::MixedDataset;
use decorr::pipeline::{run_pipeline, PipelineParams, Strategy};
use decorr::rng::Streams;
use decorr::simulate::{simulate, SimulationSettings};
use decorr::Error;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecorrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Input = 4,
    Stage = 5,
    Compute = 6,
    Panic = 7,
}

/// A mixed dataset with its unit blocks.
pub struct DecorrDataset {
    inner: MixedDataset,
}

/// An estimated CPDAG with its node names.
pub struct DecorrGraph {
    graph: Cpdag,
    names: Vec<String>,
    /// (from, to, directed) in output order.
    edges: Vec<(usize, usize, bool)>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DecorrStatus {
    match e {
        Error::Config(_) => DecorrStatus::Config,
        Error::Input(_) | Error::Parse { .. } | Error::Io { .. } => DecorrStatus::Input,
        Error::Stage { .. } => DecorrStatus::Stage,
        _ => DecorrStatus::Compute,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (DecorrStatus, String)>) -> DecorrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DecorrStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DecorrStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (DecorrStatus, String) {
    (status_of(&e), e.to_string())
}

fn arg_err(msg: &str) -> (DecorrStatus, String) {
    (DecorrStatus::InvalidArgument, msg.to_string())
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, (DecorrStatus, String)> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p).to_str().map(Some).map_err(|_| arg_err("string is not valid UTF-8"))
}

/// # Safety
/// `p` must be a valid NUL-terminated string.
unsafe fn req_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (DecorrStatus, String)> {
    opt_str(p)?.ok_or_else(|| (DecorrStatus::NullPointer, format!("{what} is null")))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn decorr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Load a dataset from a data CSV and spec sidecar. `blocks_path` may be
/// null, in which case every unit is its own block.
///
/// # Safety
/// Path arguments must be null or NUL-terminated strings; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn decorr_dataset_load(
    data_path: *const c_char,
    specs_path: *const c_char,
    blocks_path: *const c_char,
    out: *mut *mut DecorrDataset,
) -> DecorrStatus {
    guard(|| {
        if out.is_null() {
            return Err((DecorrStatus::NullPointer, "out is null".into()));
        }
        let data = PathBuf::from(req_str(data_path, "data_path")?);
        let specs = PathBuf::from(req_str(specs_path, "specs_path")?);
        let x = read_dataset(&data, &specs).map_err(lib_err)?;
        let labels = match opt_str(blocks_path)? {
            Some(b) => read_blocks_tsv(&PathBuf::from(b), x.unit_ids()).map_err(lib_err)?,
            None => (0..x.n()).collect(),
        };
        let x = x.with_blocks(labels).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(DecorrDataset { inner: x }));
        Ok(())
    })
}

/// Simulate `n` units of a `p`-node mixed model with 2p edges and blocks of
/// 10 to 15 units.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn decorr_dataset_simulate(n: usize, p: usize, seed: u64, out: *mut *mut DecorrDataset) -> DecorrStatus {
    guard(|| {
        if out.is_null() {
            return Err((DecorrStatus::NullPointer, "out is null".into()));
        }
        if n == 0 || p == 0 {
            return Err(arg_err("n and p must be positive"));
        }
        let inst = simulate(&SimulationSettings::standard(n, p), seed).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(DecorrDataset { inner: inst.data }));
        Ok(())
    })
}

/// Number of units, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn decorr_dataset_n(ds: *const DecorrDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n())
}

/// Number of variables, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn decorr_dataset_p(ds: *const DecorrDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.p())
}

/// # Safety
/// `ds` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn decorr_dataset_free(ds: *mut DecorrDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Run the estimation pipeline. `strategy` is one of `baseline`, `average`,
/// `consensus`, `consensus-ident`; `learner` one of `pc`, `hc`, `hybrid`.
/// `threads` sizes the worker pool (0 means 1).
///
/// # Safety
/// `ds` must be a live dataset handle, the strings NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn decorr_pipeline_run(
    ds: *const DecorrDataset,
    strategy: *const c_char,
    learner: *const c_char,
    seed: u64,
    threads: usize,
    out: *mut *mut DecorrGraph,
) -> DecorrStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or((DecorrStatus::NullPointer, "dataset is null".into()))?;
        if out.is_null() {
            return Err((DecorrStatus::NullPointer, "out is null".into()));
        }
        let s = req_str(strategy, "strategy")?;
        let strategy = Strategy::parse(s).ok_or_else(|| arg_err(&format!("unknown strategy `{s}`")))?;
        let l = req_str(learner, "learner")?;
        let learner = Learner::parse(l).ok_or_else(|| arg_err(&format!("unknown learner `{l}`")))?;
        let x = &ds.inner;
        let params = PipelineParams::for_dimension(x.p(), learner);
        let graph = with_threads(threads.max(1), || run_pipeline(x, strategy, &params, &Streams::new(seed)).map(|o| o.graph))
            .map_err(lib_err)?;
        let mut edges: Vec<(usize, usize, bool)> = graph.directed_edges().into_iter().map(|(a, b)| (a, b, true)).collect();
        edges.extend(graph.undirected_edges().into_iter().map(|(a, b)| (a, b, false)));
        *out = Box::into_raw(Box::new(DecorrGraph { graph, names: x.names(), edges }));
        Ok(())
    })
}

/// Number of edges, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn decorr_graph_edge_count(g: *const DecorrGraph) -> usize {
    g.as_ref().map_or(0, |g| g.edges.len())
}

/// Edge `index`: node indices and whether it is directed (`from -> to`).
///
/// # Safety
/// `g` must be a live graph handle; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn decorr_graph_edge(
    g: *const DecorrGraph,
    index: usize,
    from: *mut usize,
    to: *mut usize,
    directed: *mut bool,
) -> DecorrStatus {
    guard(|| {
        let g = g.as_ref().ok_or((DecorrStatus::NullPointer, "graph is null".into()))?;
        if from.is_null() || to.is_null() || directed.is_null() {
            return Err((DecorrStatus::NullPointer, "output pointer is null".into()));
        }
        let &(a, b, d) = g.edges.get(index).ok_or_else(|| arg_err(&format!("edge index {index} out of range")))?;
        *from = a;
        *to = b;
        *directed = d;
        Ok(())
    })
}

/// Write the edge list TSV (`from to type confidence`).
///
/// # Safety
/// `g` must be a live graph handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn decorr_graph_write(g: *const DecorrGraph, path: *const c_char) -> DecorrStatus {
    guard(|| {
        let g = g.as_ref().ok_or((DecorrStatus::NullPointer, "graph is null".into()))?;
        let path = PathBuf::from(req_str(path, "path")?);
        write_edges_tsv(&path, &g.graph, &g.names, None).map_err(lib_err)
    })
}

/// # Safety
/// `g` must be null or a graph handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn decorr_graph_free(g: *mut DecorrGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}
