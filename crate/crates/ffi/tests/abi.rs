use std::ffi::{CStr, CString};
use std::ptr;

use decorr_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(decorr_last_error()) }.to_string_lossy().into_owned()
}

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

#[test]
fn simulate_run_and_read_edges() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(decorr_dataset_simulate(40, 8, 3, &mut ds), DecorrStatus::Ok);
        assert_eq!((decorr_dataset_n(ds), decorr_dataset_p(ds)), (40, 8));

        let mut g = ptr::null_mut();
        let status = decorr_pipeline_run(ds, cstr("consensus").as_ptr(), cstr("hybrid").as_ptr(), 3, 2, &mut g);
        assert_eq!(status, DecorrStatus::Ok, "{}", last_error());
        assert_eq!(last_error(), "");

        let count = decorr_graph_edge_count(g);
        let (mut a, mut b, mut d) = (0usize, 0usize, false);
        for k in 0..count {
            assert_eq!(decorr_graph_edge(g, k, &mut a, &mut b, &mut d), DecorrStatus::Ok);
            assert!(a < 8 && b < 8 && a != b);
        }
        assert_eq!(decorr_graph_edge(g, count, &mut a, &mut b, &mut d), DecorrStatus::InvalidArgument);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edges.tsv");
        let p = cstr(path.to_str().unwrap());
        assert_eq!(decorr_graph_write(g, p.as_ptr()), DecorrStatus::Ok);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), count);

        decorr_graph_free(g);
        decorr_dataset_free(ds);
    }
}

#[test]
fn same_seed_same_graph_across_thread_counts() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(decorr_dataset_simulate(30, 6, 11, &mut ds), DecorrStatus::Ok);
        let edges = |threads: usize| {
            let mut g = ptr::null_mut();
            assert_eq!(
                decorr_pipeline_run(ds, cstr("average").as_ptr(), cstr("pc").as_ptr(), 5, threads, &mut g),
                DecorrStatus::Ok
            );
            let mut out = Vec::new();
            for k in 0..decorr_graph_edge_count(g) {
                let (mut a, mut b, mut d) = (0usize, 0usize, false);
                decorr_graph_edge(g, k, &mut a, &mut b, &mut d);
                out.push((a, b, d));
            }
            decorr_graph_free(g);
            out
        };
        assert_eq!(edges(1), edges(3));
        decorr_dataset_free(ds);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(decorr_dataset_simulate(0, 5, 1, &mut ds), DecorrStatus::InvalidArgument);
        assert!(ds.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(decorr_dataset_simulate(10, 5, 1, ptr::null_mut()), DecorrStatus::NullPointer);

        let missing = cstr("/nonexistent/data.csv");
        let specs = cstr("/nonexistent/specs.tsv");
        assert_eq!(decorr_dataset_load(missing.as_ptr(), specs.as_ptr(), ptr::null(), &mut ds), DecorrStatus::Input);
        assert!(last_error().contains("nonexistent"));

        assert_eq!(decorr_dataset_simulate(20, 4, 1, &mut ds), DecorrStatus::Ok);
        let mut g = ptr::null_mut();
        let status = decorr_pipeline_run(ds, cstr("median").as_ptr(), cstr("pc").as_ptr(), 0, 1, &mut g);
        assert_eq!(status, DecorrStatus::InvalidArgument);
        assert!(last_error().contains("median"));
        assert!(g.is_null());
        assert_eq!(decorr_pipeline_run(ptr::null(), cstr("pc").as_ptr(), cstr("pc").as_ptr(), 0, 1, &mut g), DecorrStatus::NullPointer);

        assert_eq!(decorr_dataset_n(ptr::null()), 0);
        assert_eq!(decorr_graph_edge_count(ptr::null()), 0);
        decorr_dataset_free(ptr::null_mut());
        decorr_graph_free(ptr::null_mut());
        decorr_dataset_free(ds);
    }
}

#[test]
fn load_round_trips_written_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let specs = dir.path().join("specs.tsv");
    let blocks = dir.path().join("blocks.tsv");
    std::fs::write(&data, "unit_id,a,b\nu1,0.5,1\nu2,-0.2,0\nu3,1.1,1\nu4,0.3,0\n").unwrap();
    std::fs::write(&specs, "name\tkind\tlevels\tthresholds\na\tcontinuous\t-\t-\nb\tdiscrete\t2\t-\n").unwrap();
    std::fs::write(&blocks, "unit_id\tblock_id\nu1\tA\nu2\tA\nu3\tB\nu4\tB\n").unwrap();
    let (d, s, b) = (cstr(data.to_str().unwrap()), cstr(specs.to_str().unwrap()), cstr(blocks.to_str().unwrap()));
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(decorr_dataset_load(d.as_ptr(), s.as_ptr(), b.as_ptr(), &mut ds), DecorrStatus::Ok, "{}", last_error());
        assert_eq!((decorr_dataset_n(ds), decorr_dataset_p(ds)), (4, 2));
        decorr_dataset_free(ds);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/decorr.h");
    for name in [
        "decorr_last_error",
        "decorr_dataset_load",
        "decorr_dataset_simulate",
        "decorr_dataset_n",
        "decorr_dataset_p",
        "decorr_dataset_free",
        "decorr_pipeline_run",
        "decorr_graph_edge_count",
        "decorr_graph_edge",
        "decorr_graph_write",
        "decorr_graph_free",
        "DECORR_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
