use inscat_core::array_file::{ArrayData, ArrayFile};
use inscat_core::forward::{born_amplitude, ScatteringData};
use inscat_core::greens::{AccuracyMode, Wavenumber};
use inscat_core::inversion::{
    amplitude_chi_squared, baseline_linear_inversion, delta_error, reconstruct, reconstruct_fd_oracle,
    ReconstructOptions, ReconstructedField,
};
use inscat_core::rkhs::{
    CoordinateFrame, Lambda, QuadratureConfig, RepresenterModel, SobolevKernel, SobolevKernelSpec,
};
use inscat_core::scene::{
    gaussian_bump, l_shape_detectors, lattice_sources, make_grid, place_sources_random, DetectorSet, SourceSet,
    SusceptibilityField, ThreeBall, VoxelGrid,
};
use inscat_core::Error;
use num_complex::Complex64;
use std::sync::Arc;

const STRICT: AccuracyMode = AccuracyMode::Strict;

fn k(v: f64) -> Wavenumber {
    Wavenumber::new(v).unwrap()
}

fn kernel4() -> Arc<SobolevKernel> {
    let q = QuadratureConfig {
        points: 16_384,
        ..QuadratureConfig::default_for(4)
    };
    Arc::new(SobolevKernel::new(SobolevKernelSpec::new(4, 3, q).unwrap()).unwrap())
}

fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Small planar problem on a grid centred at the origin.
struct Setup {
    truth: SusceptibilityField,
    sources: SourceSet,
    detectors: DetectorSet,
    recon: VoxelGrid,
    k: Wavenumber,
}

fn setup() -> Setup {
    let grid = make_grid(2, &[16, 16], 0.5, &[-4.0, -4.0]).unwrap();
    let truth = gaussian_bump(&grid, [1.0, -0.5, 0.0], 1.5, 0.2).unwrap();
    let sources = place_sources_random(&grid, 40, 9).unwrap();
    Setup {
        truth,
        sources,
        detectors: l_shape_detectors(2, 4).unwrap(),
        recon: make_grid(2, &[8, 8], 1.0, &[-4.0, -4.0]).unwrap(),
        k: k(0.1),
    }
}

fn fit(data: &ScatteringData) -> RepresenterModel {
    RepresenterModel::fit(kernel4(), data, CoordinateFrame::new(8.0).unwrap(), Lambda::default()).unwrap()
}

#[test]
fn global_phase_carries_through() {
    let s = setup();
    let data = born_amplitude(&s.truth, &s.sources, &s.detectors, s.k, STRICT).unwrap();
    let phase = Complex64::from_polar(1.0, 0.7);
    let base = reconstruct(&fit(&data), &s.recon, &s.detectors, s.k, ReconstructOptions::default()).unwrap();
    let turned = reconstruct(
        &fit(&data.scaled(phase)),
        &s.recon,
        &s.detectors,
        s.k,
        ReconstructOptions::default(),
    )
    .unwrap();
    let scale = max_norm(&base.values_complex);
    for (a, b) in base.values_complex.iter().zip(&turned.values_complex) {
        assert!((a * phase - b).norm() <= 1e-10 * scale, "{a} {b}");
    }
}

#[test]
fn single_block_equals_the_matching_per_detector_column() {
    let s = setup();
    let data = born_amplitude(&s.truth, &s.sources, &s.detectors, s.k, STRICT).unwrap();
    let model = fit(&data);
    let opts = ReconstructOptions {
        keep_per_detector: true,
    };
    let all = reconstruct(&model, &s.recon, &s.detectors, s.k, opts).unwrap();
    let per = all.per_detector.as_ref().unwrap();
    for (j, column) in per.iter().enumerate() {
        let one = reconstruct(&model, &s.recon, &s.detectors.subset(&[j]).unwrap(), s.k, opts).unwrap();
        assert_eq!(&one.values_complex, column);
    }
}

#[test]
fn point_reflection_reflects_the_reconstruction() {
    // every grid here is centred on the origin with dyadic spacing, so
    // negating a cell centre lands exactly on another cell centre
    let s = setup();
    let g = s.truth.grid().clone();
    let flipped = SusceptibilityField::from_fn(g.clone(), |p| s.truth.value_at(&[-p[0], -p[1], 0.0]).unwrap()).unwrap();
    let neg = |p: &[f64; 3]| [-p[0], -p[1], -p[2]];
    let src2 = SourceSet::new(2, s.sources.positions().iter().map(neg).collect()).unwrap();
    let det2 = DetectorSet::new(2, s.detectors.directions().iter().map(neg).collect()).unwrap();

    let a = born_amplitude(&s.truth, &s.sources, &s.detectors, s.k, STRICT).unwrap();
    let b = born_amplitude(&flipped, &src2, &det2, s.k, STRICT).unwrap();
    let scale = max_norm(a.amplitudes());
    for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
        assert!((x - y).norm() <= 1e-12 * scale);
    }

    let ra = reconstruct(&fit(&a), &s.recon, &s.detectors, s.k, ReconstructOptions::default()).unwrap();
    let rb = reconstruct(&fit(&b), &s.recon, &det2, s.k, ReconstructOptions::default()).unwrap();
    let scale = max_norm(&ra.values_complex);
    for cell in 0..s.recon.n_cells() {
        let c = s.recon.center(cell);
        let mirror = s.recon.cell_of(&neg(&c)).unwrap();
        assert_eq!(s.recon.center(mirror), neg(&c));
        let (x, y) = (ra.values_complex[cell], rb.values_complex[mirror]);
        assert!((x - y).norm() <= 1e-10 * scale, "cell {cell}: {x} vs {y}");
    }
}

#[test]
fn layers_equidistant_from_the_centre_plane_agree_bitwise() {
    let tb = ThreeBall::reference();
    let heights = tb.layer_heights(17);
    let grid = make_grid(2, &[35, 35], 2.0, &[0.0, 0.0]).unwrap();
    let f8 = tb.layer_field(&grid, heights[7]).unwrap();
    let f10 = tb.layer_field(&grid, heights[9]).unwrap();
    assert_eq!(f8.values(), f10.values());
    assert!(f8.max() > 0.0);
    let sources = place_sources_random(&grid, 20, 1).unwrap();
    let dets = l_shape_detectors(2, 3).unwrap();
    let a8 = born_amplitude(&f8, &sources, &dets, k(0.0126), STRICT).unwrap();
    let a10 = born_amplitude(&f10, &sources, &dets, k(0.0126), STRICT).unwrap();
    assert_eq!(a8.amplitudes(), a10.amplitudes());
}

#[test]
fn fd_oracle_of_zero_data_is_zero() {
    let grid = make_grid(2, &[10, 10], 1.0, &[0.0, 0.0]).unwrap();
    let sources = lattice_sources(&grid, 6).unwrap();
    let dets = l_shape_detectors(2, 3).unwrap();
    let zero = SusceptibilityField::zeros(grid);
    let data = born_amplitude(&zero, &sources, &dets, k(0.05), STRICT).unwrap();
    let out = reconstruct_fd_oracle(&data).unwrap();
    assert_eq!(out.grid.shape(), &[4, 4]);
    assert!(out.values_complex.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn fd_oracle_applies_the_inversion_formula_to_quadratics() {
    // A = q(r) for every detector; central differences are exact on quadratics,
    // so eta = -e^{ik d.g} (Laplacian q + k^2 q) / k^2 in 3D
    let grid = make_grid(3, &[5, 5, 5], 0.5, &[0.0, 0.0, 0.0]).unwrap();
    let sources = lattice_sources(&grid, 5).unwrap();
    let dets = DetectorSet::new(3, vec![[0.0, 0.0, 1.0], [0.6, 0.0, 0.8]]).unwrap();
    let kk = k(0.3);
    let q = |p: &[f64; 3]| Complex64::new(p[0] * p[0] - 0.5 * p[1] * p[2], 2.0 * p[2] * p[2] + p[0]);
    let lap_q = Complex64::new(2.0, 4.0);
    let amps: Vec<Complex64> = sources
        .positions()
        .iter()
        .flat_map(|p| dets.directions().iter().map(move |_| q(p)))
        .collect();
    let data = ScatteringData::new(amps, sources, dets.clone(), kk).unwrap();
    let out = reconstruct_fd_oracle(&data).unwrap();
    let per = out.per_detector.as_ref().unwrap();
    for (j, d) in dets.directions().iter().enumerate() {
        for (cell, got) in per[j].iter().enumerate() {
            let g = out.grid.center(cell);
            let ph = Complex64::from_polar(1.0, 0.3 * (d[0] * g[0] + d[1] * g[1] + d[2] * g[2]));
            let expect = -ph * (lap_q + 0.09 * q(&g)) / 0.09;
            assert!((got - expect).norm() <= 1e-9 * expect.norm(), "{got} vs {expect}");
        }
    }
}

fn baseline_problem() -> (VoxelGrid, SusceptibilityField, ScatteringData) {
    let grid = make_grid(2, &[3, 3], 1.0, &[0.0, 0.0]).unwrap();
    let eta: Vec<f64> = (0..9).map(|i| 0.1 + 0.05 * i as f64).collect();
    let truth = SusceptibilityField::new(grid.clone(), eta).unwrap();
    let sources = lattice_sources(&grid, 4).unwrap();
    let dets = l_shape_detectors(2, 5).unwrap();
    let data = born_amplitude(&truth, &sources, &dets, k(0.08), STRICT).unwrap();
    (grid, truth, data)
}

#[test]
fn baseline_recovers_well_conditioned_data() {
    let (grid, truth, data) = baseline_problem();
    let inv = baseline_linear_inversion(&data, &grid, 1e-12, STRICT).unwrap();
    for (r, t) in inv.field.values.iter().zip(truth.values()) {
        assert!((r - t).abs() <= 1e-6, "{r} vs {t}");
    }
    assert!(amplitude_chi_squared(&data, &inv.predicted).unwrap() < 1e-12);
}

#[test]
fn baseline_with_full_cutoff_is_zero() {
    let (grid, _, data) = baseline_problem();
    let inv = baseline_linear_inversion(&data, &grid, 1.0, STRICT).unwrap();
    assert!(inv.field.values.iter().all(|&v| v == 0.0));
}

#[test]
fn metric_examples() {
    let grid = make_grid(2, &[4, 4], 1.0, &[0.0, 0.0]).unwrap();
    let truth = gaussian_bump(&grid, [2.0, 2.0, 0.0], 1.0, 1.0).unwrap();
    let same = ReconstructedField::from_real(grid.clone(), truth.values().to_vec()).unwrap();
    assert_eq!(delta_error(&truth, &same).unwrap(), 0.0);
    let shifted = ReconstructedField::from_real(grid, truth.values().iter().map(|v| v + 0.1).collect()).unwrap();
    assert!((delta_error(&truth, &shifted).unwrap() - 0.1).abs() < 1e-12);

    let (_, _, data) = baseline_problem();
    assert_eq!(amplitude_chi_squared(&data, data.amplitudes()).unwrap(), 0.0);
    let zeros = vec![Complex64::new(0.0, 0.0); data.len()];
    assert!((amplitude_chi_squared(&data, &zeros).unwrap() - 1.0).abs() < 1e-15);
    let empty = ScatteringData::new(
        zeros.clone(),
        data.sources().clone(),
        data.detectors().clone(),
        data.k(),
    )
    .unwrap();
    assert!(matches!(
        amplitude_chi_squared(&empty, &zeros),
        Err(Error::UndefinedMetric(_))
    ));
}

#[test]
fn array_files_round_trip_in_ranks_one_to_three() {
    let dir = std::env::temp_dir().join(format!("inscat-arrays-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for dims in [vec![5u64], vec![2, 3], vec![2, 1, 4]] {
        let n: u64 = dims.iter().product();
        let real = ArrayFile::real(dims.clone(), (0..n).map(|i| i as f64 * 0.25 - 1.0).collect()).unwrap();
        let cplx = ArrayFile::complex(dims.clone(), (0..n).map(|i| Complex64::new(i as f64, -0.5)).collect()).unwrap();
        for (name, a) in [("r", &real), ("c", &cplx)] {
            let path = dir.join(format!("{name}{}.scat", dims.len()));
            a.write(&path).unwrap();
            let back = ArrayFile::read(&path).unwrap();
            assert_eq!(&back, a);
            assert_eq!(back.dims, dims);
        }
        assert!(matches!(real.data, ArrayData::Real(_)));
        assert!(cplx.as_real().is_err());
    }
    std::fs::remove_dir_all(&dir).unwrap();
}
