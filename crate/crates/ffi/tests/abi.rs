use std::ffi::{CStr, CString};
use std::ptr;

use dynident_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(dynident_last_error()).to_string_lossy().into_owned() }
}

fn system(id: &str) -> *mut DynidentSystem {
    let id = CString::new(id).unwrap();
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { dynident_system_lookup(id.as_ptr(), &mut sys) }, DynidentStatus::Ok);
    sys
}

#[test]
fn status_codes_are_stable() {
    assert_eq!(DynidentStatus::Ok as i32, 0);
    assert_eq!(DynidentStatus::InvalidArgument as i32, 1);
    assert_eq!(DynidentStatus::Format as i32, 11);
    assert_eq!(DynidentStatus::Panic as i32, 14);
    assert_eq!(std::mem::size_of::<DynidentAte>(), 32);
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(dynident_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn unknown_system_sets_the_last_error() {
    let id = CString::new("ode999").unwrap();
    let mut sys = ptr::null_mut();
    let st = unsafe { dynident_system_lookup(id.as_ptr(), &mut sys) };
    assert_eq!(st, DynidentStatus::InvalidArgument);
    assert!(sys.is_null());
    assert!(last_error().contains("ode999"), "{}", last_error());
    assert_eq!(unsafe { dynident_system_lookup(ptr::null(), &mut sys) }, DynidentStatus::NullPointer);
}

#[test]
fn field_eval_matches_lotka_volterra() {
    let sys = system("ode27");
    let (mut d, mut n) = (0, 0);
    unsafe {
        assert_eq!(dynident_system_dims(sys, &mut d, &mut n), DynidentStatus::Ok);
        assert_eq!((d, n), (2, 4));
        let theta = [1.0, 0.5, 2.0, 0.25];
        let x = [3.0, 2.0];
        let mut f = [0.0; 2];
        assert_eq!(dynident_field_eval(sys, theta.as_ptr(), 4, x.as_ptr(), 2, f.as_mut_ptr(), 2), DynidentStatus::Ok);
        let direct = dynident::systems::eval_vector_field(dynident::systems::lookup("ode27").unwrap(), &theta, &x).unwrap();
        assert_eq!(f.to_vec(), direct);
        let mut small = [0.0; 1];
        assert_eq!(
            dynident_field_eval(sys, theta.as_ptr(), 4, x.as_ptr(), 2, small.as_mut_ptr(), 1),
            DynidentStatus::BufferTooSmall
        );
        assert_eq!(
            dynident_field_eval(sys, theta.as_ptr(), 3, x.as_ptr(), 2, f.as_mut_ptr(), 2),
            DynidentStatus::InvalidArgument
        );
        dynident_system_free(sys);
    }
}

#[test]
fn integrate_fit_and_json_round_trip() {
    let sys = system("ode6");
    unsafe {
        let theta = [1.3, 0.8];
        let mut traj = ptr::null_mut();
        let st = dynident_integrate(sys, theta.as_ptr(), 2, ptr::null(), 0, 5.0, 100, &mut traj);
        assert_eq!(st, DynidentStatus::Ok, "{}", last_error());
        let (mut t, mut d) = (0, 0);
        assert_eq!(dynident_trajectory_shape(traj, &mut t, &mut d), DynidentStatus::Ok);
        assert_eq!((t, d), (100, 1));
        let mut states = vec![0.0; t * d];
        assert_eq!(dynident_trajectory_states(traj, states.as_mut_ptr(), states.len()), DynidentStatus::Ok);

        for method in [DynidentMethod::ClosedForm, DynidentMethod::DerivativeMatching, DynidentMethod::TrajectoryMatching] {
            let mut est = [0.0; 2];
            let mut loss = f64::NAN;
            let st = dynident_fit(sys, traj, method as i32, ptr::null(), 0, est.as_mut_ptr(), 2, &mut loss);
            assert_eq!(st, DynidentStatus::Ok, "{method:?}: {}", last_error());
            assert!((est[0] - 1.3).abs() < 1e-4 && (est[1] - 0.8).abs() < 1e-4, "{method:?}: {est:?}");
            assert!(loss.is_finite());
        }
        let mut est = [0.0; 2];
        assert_eq!(
            dynident_fit(sys, traj, 7, ptr::null(), 0, est.as_mut_ptr(), 2, ptr::null_mut()),
            DynidentStatus::InvalidArgument
        );

        let mut json = ptr::null_mut();
        assert_eq!(dynident_trajectory_to_json(traj, &mut json), DynidentStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(dynident_trajectory_from_json(json, &mut back), DynidentStatus::Ok);
        let mut again = vec![0.0; t * d];
        assert_eq!(dynident_trajectory_states(back, again.as_mut_ptr(), again.len()), DynidentStatus::Ok);
        assert_eq!(states, again);
        dynident_string_free(json);

        let bad = CString::new("{not json").unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(dynident_trajectory_from_json(bad.as_ptr(), &mut none), DynidentStatus::Format);

        dynident_trajectory_free(back);
        dynident_trajectory_free(traj);
        dynident_system_free(sys);
        dynident_trajectory_free(ptr::null_mut());
        dynident_string_free(ptr::null_mut());
    }
}

#[test]
fn closed_form_on_a_nonlinear_system_is_unsupported() {
    let sys = system("ode3");
    unsafe {
        let theta = [1.0, 2.0];
        let mut traj = ptr::null_mut();
        assert_eq!(dynident_integrate(sys, theta.as_ptr(), 2, ptr::null(), 0, 5.0, 50, &mut traj), DynidentStatus::Ok);
        let mut est = [0.0; 2];
        let st = dynident_fit(sys, traj, DynidentMethod::ClosedForm as i32, ptr::null(), 0, est.as_mut_ptr(), 2, ptr::null_mut());
        assert_ne!(st, DynidentStatus::Ok);
        dynident_trajectory_free(traj);
        dynident_system_free(sys);
    }
}

#[test]
fn aipw_recovers_a_randomized_effect() {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let n = 4000;
    let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let t: Vec<u8> = (0..n).map(|_| u8::from(r.random_bool(0.5))).collect();
    let y: Vec<f64> = (0..n).map(|i| 2.0 * f64::from(t[i]) + x[i] + r.random_range(-0.5..0.5)).collect();
    let mut out = DynidentAte::default();
    let st = unsafe { dynident_aipw_ate(y.as_ptr(), t.as_ptr(), x.as_ptr(), n, 1, &mut out) };
    assert_eq!(st, DynidentStatus::Ok, "{}", last_error());
    assert!((out.ate_hat - 2.0).abs() < 0.05, "{out:?}");
    assert!(out.se_hat > 0.0);
    let mut bad = t.clone();
    bad[0] = 2;
    assert_eq!(
        unsafe { dynident_aipw_ate(y.as_ptr(), bad.as_ptr(), x.as_ptr(), n, 1, &mut out) },
        DynidentStatus::InvalidArgument
    );
}

#[test]
fn model_load_and_encode() {
    use dynident::multiview::{generate_multiview_dataset, train_identifier, TrainConfig};
    let pairs = generate_multiview_dataset(dynident::systems::lookup("ode27").unwrap(), &[0, 1], 8, 0).unwrap();
    let cfg = TrainConfig { epochs: 1, hidden_dim: 8, depth: 1, n_init: 2, ..TrainConfig::default() };
    let (model, _) = train_identifier(&pairs, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    model.save(&path).unwrap();
    let expected = dynident::multiview::encode(&model, &pairs[0].views[0]).unwrap();

    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let json = CString::new(pairs[0].views[0].to_json_line().unwrap()).unwrap();
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(dynident_model_load(cpath.as_ptr(), &mut m), DynidentStatus::Ok, "{}", last_error());
        let mut k = 0;
        assert_eq!(dynident_model_latent_dim(m, &mut k), DynidentStatus::Ok);
        let mut traj = ptr::null_mut();
        assert_eq!(dynident_trajectory_from_json(json.as_ptr(), &mut traj), DynidentStatus::Ok);
        let mut z = vec![0.0; k];
        assert_eq!(dynident_model_encode(m, traj, z.as_mut_ptr(), k), DynidentStatus::Ok);
        assert_eq!(z, expected);
        dynident_trajectory_free(traj);
        dynident_model_free(m);

        let missing = CString::new(dir.path().join("none.json").to_str().unwrap()).unwrap();
        assert_eq!(dynident_model_load(missing.as_ptr(), &mut m), DynidentStatus::Io);
    }
}
