//! Exercises the C ABI through its Rust signatures and, when a C compiler is
//! available, through a real C program linked against the static library.

use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use intact_ffi::*;

fn planted() -> (Vec<Vec<f64>>, Vec<usize>, usize) {
    let p = intact::synth::planted_linear(40, &[4, 3], 2, 9);
    let dims = vec![4, 3];
    let views = p
        .views
        .iter()
        .map(|m| m.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect())
        .collect();
    (views, dims, 40)
}

unsafe fn make_dataset(views: &[Vec<f64>], dims: &[usize], n: usize) -> *mut IntactDataset {
    let ptrs: Vec<*const f64> = views.iter().map(|v| v.as_ptr()).collect();
    let mut ds = ptr::null_mut();
    let st = intact_dataset_new(ptrs.len(), ptrs.as_ptr(), dims.as_ptr(), n, ptr::null(), &mut ds);
    assert_eq!(st, IntactStatus::Ok);
    ds
}

#[test]
fn fit_embed_save_load_round_trip() {
    unsafe {
        let (views, dims, n) = planted();
        let ds = make_dataset(&views, &dims, n);
        let mut hp = intact_hyperparams_default();
        hp.latent_dim = 2;
        let mut model = ptr::null_mut();
        let mut emb = ptr::null_mut();
        assert_eq!(intact_fit(ds, &hp, &mut model, &mut emb), IntactStatus::Ok);
        assert!(intact_last_error().is_null());
        assert_eq!(intact_model_n_views(model), 2);
        assert_eq!(intact_model_latent_dim(model), 2);
        assert_eq!(intact_model_view_dim(model, 1), 3);
        assert_eq!(intact_model_view_dim(model, 5), 0);

        let (mut rows, mut d) = (0usize, 0usize);
        assert_eq!(intact_embedding_shape(emb, &mut rows, &mut d), IntactStatus::Ok);
        assert_eq!((rows, d), (40, 2));
        let mut x = vec![0.0; rows * d];
        assert_eq!(intact_embedding_copy(emb, x.as_mut_ptr(), x.len()), IntactStatus::Ok);
        assert_eq!(
            intact_embedding_copy(emb, x.as_mut_ptr(), 3),
            IntactStatus::BufferTooSmall
        );

        // embedding a training example reproduces its coordinate
        let z0: Vec<f64> = views[0][0..4].to_vec();
        let z1: Vec<f64> = views[1][0..3].to_vec();
        let zs = [z0.as_ptr(), z1.as_ptr()];
        let mut out = [0.0; 2];
        assert_eq!(intact_model_embed(model, zs.as_ptr(), out.as_mut_ptr(), 2), IntactStatus::Ok);
        assert!((out[0] - x[0]).abs() < 1e-6 && (out[1] - x[1]).abs() < 1e-6);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("m.txt").to_str().unwrap()).unwrap();
        assert_eq!(intact_model_save(model, path.as_ptr()), IntactStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(intact_model_load(path.as_ptr(), &mut loaded), IntactStatus::Ok);
        let mut out2 = [0.0; 2];
        assert_eq!(intact_model_embed(loaded, zs.as_ptr(), out2.as_mut_ptr(), 2), IntactStatus::Ok);
        assert_eq!(out, out2);

        intact_model_free(loaded);
        intact_model_free(model);
        intact_embedding_free(emb);
        intact_dataset_free(ds);
    }
}

#[test]
fn kernel_fit_through_ffi() {
    unsafe {
        let (views, dims, n) = planted();
        let ds = make_dataset(&views, &dims, n);
        let mut hp = intact_hyperparams_default();
        hp.latent_dim = 2;
        hp.max_outer = 20;
        let mut model = ptr::null_mut();
        let mut emb = ptr::null_mut();
        let st = intact_kernel_fit(ds, &hp, IntactKernel::Rbf, -1.0, &mut model, &mut emb);
        assert_eq!(st, IntactStatus::Ok);
        assert_eq!(intact_model_n_views(model), 2);
        intact_model_free(model);
        intact_embedding_free(emb);
        intact_dataset_free(ds);
    }
}

#[test]
fn errors_map_to_codes_and_messages() {
    unsafe {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [f64::NAN, 1.0];
        let ptrs = [a.as_ptr(), b.as_ptr()];
        let dims = [2usize, 1];
        let mut ds = ptr::null_mut();
        let st = intact_dataset_new(2, ptrs.as_ptr(), dims.as_ptr(), 2, ptr::null(), &mut ds);
        assert_eq!(st, IntactStatus::NonFiniteInput);
        assert!(ds.is_null());
        let msg = CStr::from_ptr(intact_last_error()).to_str().unwrap();
        assert!(msg.contains("non-finite"), "{msg}");

        let st = intact_dataset_new(0, ptr::null(), ptr::null(), 0, ptr::null(), &mut ds);
        assert_eq!(st, IntactStatus::EmptyView);

        let mut model = ptr::null_mut();
        let mut emb = ptr::null_mut();
        let hp = intact_hyperparams_default();
        assert_eq!(intact_fit(ptr::null(), &hp, &mut model, &mut emb), IntactStatus::NullPointer);

        let ok = [1.0, 2.0];
        let ptrs = [ok.as_ptr()];
        let dims = [1usize];
        let st = intact_dataset_new(1, ptrs.as_ptr(), dims.as_ptr(), 2, ptr::null(), &mut ds);
        assert_eq!(st, IntactStatus::Ok);
        let mut bad = hp;
        bad.scale = -1.0;
        assert_eq!(intact_fit(ds, &bad, &mut model, &mut emb), IntactStatus::NonPositiveScale);
        intact_dataset_free(ds);

        let missing = CString::new("/nonexistent/model.txt").unwrap();
        assert_eq!(intact_model_load(missing.as_ptr(), &mut model), IntactStatus::IoError);
        assert!(model.is_null());

        // freeing null handles is a no-op
        intact_model_free(ptr::null_mut());
        intact_embedding_free(ptr::null_mut());
        intact_dataset_free(ptr::null_mut());
    }
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn find_staticlib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    exe.ancestors()
        .skip(1)
        .take(3)
        .map(|d| d.join("libintact_ffi.a"))
        .find(|p| p.is_file())
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

#[test]
fn header_is_valid_c() {
    let header = crate_dir().join("include").join("intact.h");
    assert!(header.is_file(), "cbindgen header missing");
    if !have_cc() {
        eprintln!("cc not found; skipping C syntax check");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("check.c");
    std::fs::write(&src, "#include \"intact.h\"\nint main(void) { return 0; }\n").unwrap();
    let st = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
        .unwrap();
    assert!(st.success());
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "intact.h"

int main(int argc, char **argv) {
    double a[] = {1, 0, 0, 1, 1, 1, 2, 1, 1, 2, -1, 0};
    double b[] = {1, 2, -1, 0.5, 3, -2};
    const double *views[] = {a, b};
    size_t dims[] = {2, 1};
    IntactDataset *ds = NULL;
    if (intact_dataset_new(2, views, dims, 6, NULL, &ds) != INTACT_STATUS_OK) return 1;
    IntactHyperparams hp = intact_hyperparams_default();
    hp.latent_dim = 1;
    IntactModel *model = NULL;
    IntactEmbedding *emb = NULL;
    if (intact_fit(ds, &hp, &model, &emb) != INTACT_STATUS_OK) return 2;
    size_t n = 0, d = 0;
    intact_embedding_shape(emb, &n, &d);
    if (n != 6 || d != 1) return 3;
    if (intact_model_save(model, argv[1]) != INTACT_STATUS_OK) return 4;
    IntactModel *bad = NULL;
    if (intact_model_load("/nonexistent", &bad) != INTACT_STATUS_IO_ERROR) return 5;
    if (intact_last_error() == NULL || strlen(intact_last_error()) == 0) return 6;
    intact_model_free(model);
    intact_embedding_free(emb);
    intact_dataset_free(ds);
    printf("ok\n");
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = find_staticlib() else {
        eprintln!("static library not found next to the test binary; skipping");
        return;
    };
    if !have_cc() {
        eprintln!("cc not found; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("prog.c");
    let bin = dir.path().join("prog");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let st = Command::new("cc")
        .arg("-std=c99")
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(st.success(), "C program failed to compile");
    let model_path = dir.path().join("model.txt");
    let out = Command::new(&bin).arg(&model_path).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
    assert!(Path::new(&model_path).is_file());
}
