//! End-to-end use of the public API: generate, reduce, save, reload.

use esn_mor::io::{model_from_reader, to_string_exact, DeimRecord, LoadedModel, PodRecord};
use esn_mor::tasks::input_row;
use esn_mor::tasks::signals::gen_signal;
use esn_mor::{Basis, Deim, Esn, Esn32, EsnError, HyperParams, Pod, Reservoir, SignalSpec};
use nalgebra::DMatrix;

fn hyper(n: usize) -> HyperParams {
    HyperParams {
        reservoir_size: n,
        leak_rate: 0.8,
        spectral_radius: 0.9,
        input_scaling: 0.5,
        bias_scaling: 0.2,
        n_inputs: 1,
        n_outputs: 1,
        seed: 11,
    }
}

fn inputs(len: usize) -> DMatrix<f64> {
    input_row(&gen_signal(&SignalSpec::uniform(-1.0, 1.0, len, 5)).unwrap())
}

fn outputs(r: &dyn Reservoir<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
    r.run(u, &r.zero_state()).unwrap().outputs
}

fn reload(json: &str) -> LoadedModel<f64> {
    model_from_reader(json.as_bytes()).unwrap()
}

#[test]
fn full_rank_reductions_track_the_full_network() {
    let esn = Esn::generate(&hyper(20)).unwrap().with_readout(DMatrix::from_element(1, 20, 0.1)).unwrap();
    let u = inputs(400);
    let x = esn.run_states(&u, &esn.zero_state()).unwrap();
    let basis = Basis::from_snapshots(&x).unwrap();

    let pod = Pod::from_cutoff(&esn, &basis, 0.0).unwrap();
    assert_eq!(pod.reduced_dim(), 20);
    let deim = Deim::build(&pod, &basis, 0.0).unwrap();
    assert_eq!(deim.operators().n_points(), 20);

    let y = outputs(&esn, &u);
    assert!((&y - outputs(&pod, &u)).amax() < 1e-10);
    assert!((&y - outputs(&deim, &u)).amax() < 1e-8);
}

#[test]
fn saved_models_reload_with_identical_outputs() {
    let esn = Esn::generate(&hyper(24)).unwrap().with_readout(DMatrix::from_element(1, 24, -0.05)).unwrap();
    let u = inputs(300);
    let basis = Basis::from_snapshots(&esn.run_states(&u, &esn.zero_state()).unwrap()).unwrap();
    let pod = Pod::from_rank(&esn, &basis, 8).unwrap();
    let deim = Deim::build(&pod, &basis, 0.05).unwrap();

    let pod_json = to_string_exact(&PodRecord::from_model(&esn, &pod, Some(&basis), None)).unwrap();
    let deim_json = to_string_exact(&DeimRecord::from_model(&esn, &deim, Some(&basis), None)).unwrap();

    match reload(&pod_json) {
        LoadedModel::Pod(e, p) => {
            assert_eq!(outputs(&p, &u), outputs(&pod, &u));
            assert_eq!(outputs(&e, &u), outputs(&esn, &u));
        }
        _ => panic!("expected a POD model"),
    }
    match reload(&deim_json) {
        LoadedModel::Deim(_, d) => {
            assert_eq!(d.operators().pivots(), deim.operators().pivots());
            assert_eq!(outputs(&d, &u), outputs(&deim, &u));
        }
        _ => panic!("expected a DEIM model"),
    }
}

#[test]
fn tampered_interpolation_operators_are_rejected() {
    let esn = Esn::generate(&hyper(16)).unwrap();
    let basis = Basis::from_snapshots(&esn.run_states(&inputs(200), &esn.zero_state()).unwrap()).unwrap();
    let pod = Pod::from_rank(&esn, &basis, 6).unwrap();
    let deim = Deim::build(&pod, &basis, 0.05).unwrap();
    let mut rec = DeimRecord::from_model(&esn, &deim, None, None);
    rec.t2[0][0] += 1.0;
    let json = to_string_exact(&rec).unwrap();
    assert!(matches!(model_from_reader::<f64, _>(json.as_bytes()), Err(EsnError::Format(_))));
}

#[test]
fn single_precision_networks_follow_double_precision_ones() {
    let h = hyper(30);
    let e64 = Esn::generate(&h).unwrap();
    let e32 = Esn32::generate(&h).unwrap();
    let u = inputs(200);
    let x64 = e64.run_states(&u, &e64.zero_state()).unwrap();
    let x32 = e32.run_states(&u.map(|v| v as f32), &e32.zero_state()).unwrap();
    let gap = x64.iter().zip(x32.iter()).map(|(a, b)| (a - *b as f64).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-3, "f32 drifted by {gap}");
}
