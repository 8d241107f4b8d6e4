use std::fs::File;

use catgate::homodyne::{read_histograms_csv, sample, uniform_phases, write_histograms_csv, Binning, QuadratureRecord};
use catgate::pipeline::{Preset, RunConfig};
use catgate::states::{coherent, squeezed_vacuum};
use catgate::{DensityOperator, FockKet};

#[test]
fn states_round_trip_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let ket = coherent(0.92, 20).unwrap().rotated(0.4).unwrap();
    let path = dir.path().join("ket.json");
    ket.write_json(File::create(&path).unwrap()).unwrap();
    let back = FockKet::read_json(File::open(&path).unwrap()).unwrap();
    assert_eq!(back, ket);

    let rho = DensityOperator::pure(&squeezed_vacuum(0.5, 16).unwrap()).unwrap();
    let path = dir.path().join("rho.json");
    rho.write_json(File::create(&path).unwrap()).unwrap();
    // reading validates (Hermitian part, eigenvalue clipping), which may touch the last bits
    let back = DensityOperator::read_json(File::open(&path).unwrap()).unwrap();
    assert!((back.matrix() - rho.matrix()).camax() < 1e-14);
}

#[test]
fn quadratures_and_histograms_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let rho = DensityOperator::pure(&squeezed_vacuum(0.5, 16).unwrap()).unwrap();
    let rec = sample(&rho, &uniform_phases(3), 500, 9).unwrap();

    let path = dir.path().join("quadratures.csv");
    rec.write_csv(File::create(&path).unwrap()).unwrap();
    let back = QuadratureRecord::read_csv(File::open(&path).unwrap()).unwrap();
    assert_eq!(back.samples(), rec.samples());

    let hists = rec.histograms(&Binning::default()).unwrap();
    let path = dir.path().join("histograms.csv");
    write_histograms_csv(&hists, File::create(&path).unwrap()).unwrap();
    let back = read_histograms_csv(File::open(&path).unwrap()).unwrap();
    assert_eq!(back.len(), 3);
    for (a, b) in back.iter().zip(&hists) {
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.total(), 500);
    }
}

#[test]
fn wrong_csv_header_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "phi,x\n0,1\n").unwrap();
    let err = QuadratureRecord::read_csv(File::open(&path).unwrap()).unwrap_err();
    assert!(err.is_config_error());
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    let cfg = RunConfig::for_preset(Preset::Fig4);
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    assert_eq!(RunConfig::load(&path).unwrap(), cfg);
}
