use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use fsq_core::phantom::{self, PhantomSpec};
use fsq_ffi::*;

fn last_error() -> String {
    let p = fsq_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cstr(s: impl AsRef<str>) -> CString {
    CString::new(s.as_ref()).unwrap()
}

fn small_phantom(dir: &Path) {
    let spec = PhantomSpec {
        positives: 4,
        decoys: 4,
        ..PhantomSpec::default()
    };
    phantom::generate(&spec).unwrap().write(dir).unwrap();
}

#[test]
fn scores_phantom_like_the_library() {
    let dir = tempfile::tempdir().unwrap();
    small_phantom(dir.path());
    let scene_path = cstr(dir.path().join("phantom.scene").to_str().unwrap());
    let fib_path = cstr(dir.path().join("fibers.fib").to_str().unwrap());
    let text = cstr(phantom::QUERY);

    unsafe {
        let mut scene = ptr::null_mut();
        assert_eq!(fsq_scene_load(scene_path.as_ptr(), &mut scene), FsqStatus::Ok);
        let mut n = 0usize;
        assert_eq!(fsq_scene_structure_count(scene, &mut n), FsqStatus::Ok);
        assert_eq!(n, 4);

        let mut query = ptr::null_mut();
        assert_eq!(fsq_query_compile(scene, text.as_ptr(), ptr::null(), &mut query), FsqStatus::Ok);
        assert_eq!(fsq_query_clause_count(query, &mut n), FsqStatus::Ok);
        assert_eq!(n, 3);

        let mut set = ptr::null_mut();
        assert_eq!(fsq_fibers_load(fib_path.as_ptr(), &mut set), FsqStatus::Ok);
        let mut results = ptr::null_mut();
        assert_eq!(fsq_evaluate(query, set, &mut results), FsqStatus::Ok);
        assert_eq!(fsq_results_len(results, &mut n), FsqStatus::Ok);
        assert_eq!(n, 8);

        let scene_rs = fsq_core::scene::load_scene(scene_path.to_str().unwrap()).unwrap();
        let qf = fsq_core::query::parse_query_file(phantom::QUERY).unwrap();
        let q = fsq_core::query::resolve(&qf.ast, &qf.options, &scene_rs, None).unwrap();
        let fibers = fsq_core::io::load_fibers(fib_path.to_str().unwrap()).unwrap();
        let expected = fsq_core::query::evaluate_set(&q, fibers.fibers());

        for (i, e) in expected.iter().enumerate() {
            let mut s = FsqScore { fiber_id: 0, degree: -1.0, accepted: false, clause_count: 0 };
            assert_eq!(fsq_results_get(results, i, &mut s), FsqStatus::Ok);
            assert_eq!(s.fiber_id, e.id);
            assert_eq!(s.degree, e.degree);
            assert_eq!(s.accepted, e.accepted);
            let mut buf = [0.0f64; 8];
            let mut written = 0usize;
            assert_eq!(
                fsq_results_clause_degrees(results, i, buf.as_mut_ptr(), buf.len(), &mut written),
                FsqStatus::Ok
            );
            assert_eq!(&buf[..written], &e.clause_degrees[..]);
        }

        let mut s = FsqScore { fiber_id: 0, degree: 0.0, accepted: false, clause_count: 0 };
        assert_eq!(fsq_results_get(results, 99, &mut s), FsqStatus::OutOfRange);
        assert!(last_error().contains("out of range"));

        assert_eq!(fsq_query_set_threshold(query, 1.5), FsqStatus::InvalidArgument);
        assert_eq!(fsq_query_set_threshold(query, 1.0), FsqStatus::Ok);

        fsq_results_free(results);
        fsq_fibers_free(set);
        fsq_query_free(query);
        fsq_scene_free(scene);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    small_phantom(dir.path());
    let scene_path = cstr(dir.path().join("phantom.scene").to_str().unwrap());
    unsafe {
        let mut scene = ptr::null_mut();
        let missing = cstr("/nonexistent/x.scene");
        assert_eq!(fsq_scene_load(missing.as_ptr(), &mut scene), FsqStatus::Io);
        assert!(scene.is_null());
        assert!(last_error().contains("/nonexistent/x.scene"));

        assert_eq!(fsq_scene_load(ptr::null(), &mut scene), FsqStatus::NullPointer);
        assert_eq!(fsq_scene_load(scene_path.as_ptr(), ptr::null_mut()), FsqStatus::NullPointer);

        assert_eq!(fsq_scene_load(scene_path.as_ptr(), &mut scene), FsqStatus::Ok);
        assert!(fsq_last_error().is_null());

        let mut query = ptr::null_mut();
        let bad = cstr("crossing(Canal) then");
        assert_eq!(fsq_query_compile(scene, bad.as_ptr(), ptr::null(), &mut query), FsqStatus::Parse);
        assert!(last_error().starts_with("1:"));
        let unknown = cstr("crossing(Nowhere)");
        assert_eq!(fsq_query_compile(scene, unknown.as_ptr(), ptr::null(), &mut query), FsqStatus::Resolve);
        assert!(query.is_null());

        let invalid = [0xffu8, 0];
        assert_eq!(
            fsq_query_compile(scene, invalid.as_ptr().cast(), ptr::null(), &mut query),
            FsqStatus::InvalidUtf8
        );
        fsq_scene_free(scene);
    }
}

#[test]
fn fibers_can_be_built_in_memory() {
    unsafe {
        let set = fsq_fibers_new();
        let xyz = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0];
        assert_eq!(fsq_fibers_push(set, 7, xyz.as_ptr(), 3), FsqStatus::Ok);
        assert_eq!(fsq_fibers_push(set, 7, xyz.as_ptr(), 3), FsqStatus::InvalidArgument);
        assert_eq!(fsq_fibers_push(set, 8, ptr::null(), 2), FsqStatus::NullPointer);
        let mut n = 0;
        assert_eq!(fsq_fibers_len(set, &mut n), FsqStatus::Ok);
        assert_eq!(n, 1);
        fsq_fibers_free(set);
        fsq_fibers_free(ptr::null_mut());
    }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(fsq_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cxx() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/fsq.h");
    assert!(header.exists(), "build script did not write {}", header.display());
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected fsq.h"),
            Err(_) => eprintln!("{compiler} not found, skipping"),
        }
    }
}
