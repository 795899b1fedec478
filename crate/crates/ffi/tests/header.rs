//! The generated header must compile as C and as C++ against a program touching every
//! declaration. Skipped when no C compiler is on PATH.

use std::path::Path;
use std::process::Command;

const PROGRAM: &str = r#"
#include "dynident.h"
int main(void) {
    DynidentSystem *sys = 0;
    DynidentTrajectory *traj = 0;
    DynidentModel *model = 0;
    DynidentAte ate;
    char *json = 0;
    double buf[4];
    size_t a, b;
    DynidentStatus st = dynident_system_lookup("ode27", &sys);
    st = dynident_system_dims(sys, &a, &b);
    st = dynident_field_eval(sys, buf, 4, buf, 2, buf, 2);
    st = dynident_integrate(sys, buf, 4, 0, 0, 1.0, 10, &traj);
    st = dynident_trajectory_shape(traj, &a, &b);
    st = dynident_trajectory_states(traj, buf, 4);
    st = dynident_trajectory_to_json(traj, &json);
    st = dynident_trajectory_from_json(json, &traj);
    st = dynident_fit(sys, traj, DYNIDENT_METHOD_CLOSED_FORM, 0, 0, buf, 4, 0);
    st = dynident_aipw_ate(buf, (const uint8_t *)buf, buf, 1, 1, &ate);
    st = dynident_model_load("m.json", &model);
    st = dynident_model_latent_dim(model, &a);
    st = dynident_model_encode(model, traj, buf, 4);
    dynident_model_free(model);
    dynident_string_free(json);
    dynident_trajectory_free(traj);
    dynident_system_free(sys);
    (void)dynident_version();
    (void)dynident_last_error();
    return st == DYNIDENT_STATUS_OK ? 0 : 1;
}
"#;

fn compiles(compiler: &str, lang: &str) -> Option<bool> {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new(compiler)
        .args(["-x", lang, "-fsyntax-only", "-Wall", "-Werror"])
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .output()
        .ok()?;
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    Some(out.status.success())
}

#[test]
fn header_compiles_as_c_and_cpp() {
    match compiles("cc", "c") {
        None => eprintln!("no C compiler, skipping"),
        Some(ok) => {
            assert!(ok, "header does not compile as C");
            if let Some(ok) = compiles("c++", "c++") {
                assert!(ok, "header does not compile as C++");
            }
        }
    }
}
