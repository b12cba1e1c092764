use std::ffi::{c_char, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use pdmp_core::model::shipped;
use pdmp_ffi::*;

fn model(text: &str) -> *mut PdmpModel {
    let json = CString::new(text).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { pdmp_model_from_json(json.as_ptr(), &mut m) }, PdmpStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { pdmp_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    let bytes: Vec<u8> = buf.iter().take_while(|&&c| c != 0).map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn primal_solve_through_the_c_interface() {
    let m = model(shipped::M_DET);
    unsafe {
        assert_eq!(pdmp_model_dim(m), 1);
        let mut eps = 0.0;
        assert_eq!(pdmp_model_epsilon_interior(m, &mut eps), PdmpStatus::Ok);
        assert!((eps - 0.5).abs() < 1e-9, "{eps}");
        let mut f = ptr::null_mut();
        assert_eq!(pdmp_solve_primal(m, 100, 1e-8, &mut f), PdmpStatus::Ok);
        assert!(pdmp_field_iterations(f) > 0);
        assert!(pdmp_field_residual(f) < 1e-8);
        let (x, mut v) = (0.3f64, 0.0);
        assert_eq!(pdmp_field_eval(f, &x, 1, 0, &mut v), PdmpStatus::Ok);
        let exact = (-0.7f64).exp() / (1.0 - (-0.5f64).exp());
        assert!((v - exact).abs() < 1e-6, "{v}");
        assert_eq!(pdmp_field_eval(f, &x, 1, 1, &mut v), PdmpStatus::InvalidArgument);
        assert_eq!(pdmp_field_eval(f, &x, 2, 0, &mut v), PdmpStatus::InvalidArgument);
        pdmp_field_free(f);
        pdmp_model_free(m);
    }
}

#[test]
fn dual_fields_expose_every_pair() {
    let m = model(shipped::M_2A);
    unsafe {
        let mut f = ptr::null_mut();
        assert_eq!(pdmp_solve_dual(m, 20, 1e-8, 4.0, &mut f), PdmpStatus::Ok);
        let x = 0.5f64;
        for pair in 0..4 {
            let mut v = f64::NAN;
            assert_eq!(pdmp_field_eval(f, &x, 1, pair, &mut v), PdmpStatus::Ok);
            assert!(v.is_finite() && v > 0.0);
        }
        let mut bad = ptr::null_mut();
        assert_eq!(pdmp_solve_dual(m, 20, 1e-8, -1.0, &mut bad), PdmpStatus::InvalidArgument);
        assert!(bad.is_null());
        pdmp_field_free(f);
        pdmp_model_free(m);
    }
}

#[test]
fn errors_are_reported_with_codes_and_messages() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(pdmp_model_from_json(ptr::null(), &mut m), PdmpStatus::NullPointer);
        let bad = CString::new("{\"geometry\": 1}").unwrap();
        assert_eq!(pdmp_model_from_json(bad.as_ptr(), &mut m), PdmpStatus::InvalidModel);
        assert!(m.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(pdmp_last_error_message(ptr::null_mut(), 0), last_error().len());
    }
    let m = model(shipped::M_2A);
    unsafe {
        let mut f = ptr::null_mut();
        assert_eq!(pdmp_solve_primal(m, 0, 1e-8, &mut f), PdmpStatus::InvalidArgument);
        assert!(last_error().contains("grid"), "{}", last_error());
        pdmp_model_free(m);
        pdmp_model_free(ptr::null_mut());
        pdmp_field_free(ptr::null_mut());
        assert_eq!(pdmp_model_dim(ptr::null()), 0);
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use_header.c");
    std::fs::write(
        &src,
        "#include \"pdmp.h\"\nint main(void) {\n  PdmpModel *m = 0;\n  PdmpStatus s = pdmp_model_from_json(\"{}\", &m);\n  char buf[64];\n  pdmp_last_error_message(buf, sizeof buf);\n  return s == PDMP_STATUS_OK;\n}\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&src)
        .output()
        .expect("a C compiler on PATH");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
