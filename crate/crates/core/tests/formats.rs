use std::fs;

use gdla::attention::HeadConfig;
use gdla::conv::GridShape;
use gdla::diagnostics::{flop_count, DiagnosticMap, Workload};
use gdla::io::{load_tensor, parse_pgm, pgm_string, quantize, save_tensor, write_pgm, FormatError};
use gdla::mixer::{BlockConfig, FfnConfig, FfnKind};
use gdla::rng::Rng;
use gdla::tensor::Tensor;

#[test]
fn tensor_file_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.txt");
    let mut rng = Rng::new(3);
    let mut t = rng.gaussian_matrix(5, 7);
    t.data_mut()[0] = f64::MIN_POSITIVE / 8.0;
    t.data_mut()[1] = -1e300;
    save_tensor(&path, &t).unwrap();
    let back = load_tensor(&path).unwrap();
    assert_eq!(back.shape(), t.shape());
    let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&t));
}

#[test]
fn tensor_file_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("missing.txt", None),
        ("header.txt", Some("dims 2 2\n1 2 3 4\n")),
        ("count.txt", Some("shape 2 2\n1 2 3\n")),
        ("token.txt", Some("shape 2 2\n1 2 x 4\n")),
        ("nan.txt", Some("shape 1 2\n1 NaN\n")),
    ];
    let mut kinds = Vec::new();
    for (name, body) in cases {
        let path = dir.path().join(name);
        if let Some(b) = body {
            fs::write(&path, b).unwrap();
        }
        let err = load_tensor(&path).unwrap_err();
        kinds.push(match err {
            FormatError::Io(_) => "io",
            FormatError::MalformedHeader(_) => "header",
            FormatError::CountMismatch { .. } => "count",
            FormatError::NonNumeric { .. } => "token",
            FormatError::Tensor(_) => "tensor",
            _ => "other",
        });
    }
    assert_eq!(kinds, ["io", "header", "count", "token", "tensor"]);
}

#[test]
fn pgm_quantization_and_layout() {
    assert_eq!(quantize(0.0), 0);
    assert_eq!(quantize(1.0), 255);
    assert_eq!(quantize(0.5), 128);
    assert_eq!(quantize(0.498), 127);

    let grid = GridShape::new(2, 3).unwrap();
    let map = DiagnosticMap::raw(grid, vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]).unwrap();
    let text = pgm_string(&map).unwrap();
    assert_eq!(text, "P2\n3 2\n255\n0 51 102\n153 204 255\n");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.pgm");
    write_pgm(&path, &map).unwrap();
    let pgm = parse_pgm(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!((pgm.width, pgm.height, pgm.maxval), (3, 2, 255));
    for (u, v) in pgm.unit_values().iter().zip(&map.values) {
        assert!((u - v).abs() <= 0.5 / 255.0 + 1e-15);
    }

    let bad = DiagnosticMap::raw(grid, vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.5]).unwrap();
    assert!(matches!(
        pgm_string(&bad),
        Err(FormatError::OutOfRange { token: 5, .. })
    ));
}

fn fit(w: Workload, config: &BlockConfig) -> (i128, i128, i128) {
    // Exact quadratic through N = 256, 512, 768.
    let t = [256, 512, 768].map(|n| flop_count(w, config, n).unwrap().total() as i128);
    let h = 256i128;
    let c2 = (t[2] - 2 * t[1] + t[0]) / (2 * h * h);
    let c1 = (t[1] - t[0]) / h - c2 * 3 * h;
    let c0 = t[0] - c1 * h - c2 * h * h;
    (c2, c1, c0)
}

#[test]
fn flop_totals_fit_their_polynomials() {
    let head = HeadConfig::new(32, 4, 8).unwrap();
    for ffn in FfnKind::ALL {
        let config = BlockConfig::gdla(head, FfnConfig::new(ffn));
        for w in Workload::ALL {
            let (c2, c1, c0) = fit(w, &config);
            let p = flop_count(w, &config, 1).unwrap().total_poly();
            assert_eq!(
                (c2, c1, c0),
                (p.quadratic as i128, p.linear as i128, p.constant as i128)
            );
            let quadratic = matches!(w, Workload::Softmax | Workload::Diff);
            assert_eq!(c2 > 0, quadratic, "{w:?}");
            // Predicts a fourth point.
            let n = 4096;
            assert_eq!(
                flop_count(w, &config, n).unwrap().total() as i128,
                c2 * 4096 * 4096 + c1 * 4096 + c0
            );
        }
    }
}

#[test]
fn linear_attention_flops_double_with_tokens() {
    let config = BlockConfig::gdla(HeadConfig::new(32, 4, 8).unwrap(), FfnConfig::default());
    let at = |n| flop_count(Workload::Linear, &config, n).unwrap().total();
    // No constant term: doubling N doubles the count exactly.
    assert_eq!(at(2048), 2 * at(1024));
}
