//! Library routes against naive nested-loop reimplementations.

use gdla::attention::{
    gated_head, gdla_multihead, linear_attention, softmax_attention, GateKind, GdlaHeadParams,
    HeadConfig, LinearMode,
};
use gdla::conv::{dwconv2d, GridShape};
use gdla::mixer::{
    ffn_forward, local_branch, Block, BlockConfig, FfnConfig, FfnKind, FfnWeights, LocalMixers,
    TokenMixer,
};
use gdla::rng::Rng;
use gdla::tensor::{matmul, Tensor, RMS_EPS};

type Mat = Vec<Vec<f64>>;

fn mat(t: &Tensor) -> Mat {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

fn max_diff(a: &Mat, b: &Tensor) -> f64 {
    assert_eq!(a.len(), b.rows());
    a.iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, v)| (i, j, *v)))
        .map(|(i, j, v)| (v - b.get(i, j)).abs())
        .fold(0.0, f64::max)
}

fn mm(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for p in 0..k {
                s += a[i][p] * b[p][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn cols(a: &Mat, lo: usize, hi: usize) -> Mat {
    a.iter().map(|r| r[lo..hi].to_vec()).collect()
}

fn hcat(parts: &[Mat]) -> Mat {
    (0..parts[0].len())
        .map(|i| parts.iter().flat_map(|p| p[i].clone()).collect())
        .collect()
}

fn elementwise(a: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    a.iter()
        .map(|r| r.iter().map(|&v| f(v)).collect())
        .collect()
}

fn zip(a: &Mat, b: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(&p, &q)| f(p, q)).collect())
        .collect()
}

fn silu(v: f64) -> f64 {
    v / (1.0 + (-v).exp())
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn elu1(v: f64) -> f64 {
    if v > 0.0 {
        v + 1.0
    } else {
        v.exp()
    }
}

fn rmsnorm(a: &Mat) -> Mat {
    a.iter()
        .map(|r| {
            let ms = r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64;
            let d = (ms + RMS_EPS).sqrt();
            r.iter().map(|v| v / d).collect()
        })
        .collect()
}

/// `Σ_j φ(q_i)·φ(k_j) v_j / Σ_j φ(q_i)·φ(k_j)`, one query at a time.
fn linear_attn(q: &Mat, k: &Mat, v: &Mat) -> Mat {
    q.iter()
        .map(|qi| {
            let mut num = vec![0.0; v[0].len()];
            let mut den = 0.0;
            for (kj, vj) in k.iter().zip(v) {
                let w: f64 = qi.iter().zip(kj).map(|(&a, &b)| elu1(a) * elu1(b)).sum();
                den += w;
                for (n, &x) in num.iter_mut().zip(vj) {
                    *n += w * x;
                }
            }
            num.iter().map(|n| n / den).collect()
        })
        .collect()
}

fn softmax_attn(q: &Mat, k: &Mat, v: &Mat) -> Mat {
    let scale = 1.0 / (q[0].len() as f64).sqrt();
    q.iter()
        .map(|qi| {
            let s: Vec<f64> = k
                .iter()
                .map(|kj| scale * qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = s.iter().map(|x| (x - m).exp()).collect();
            let z: f64 = e.iter().sum();
            let mut out = vec![0.0; v[0].len()];
            for (w, vj) in e.iter().zip(v) {
                for (o, x) in out.iter_mut().zip(vj) {
                    *o += w / z * x;
                }
            }
            out
        })
        .collect()
}

/// Depthwise same-padded cross-correlation, kernels indexed `[c][dy][dx]`.
fn dwconv(x: &Mat, h: usize, w: usize, kernels: &Tensor) -> Mat {
    let (c, k) = (x[0].len(), kernels.shape()[1]);
    let r = (k / 2) as isize;
    let mut out = vec![vec![0.0; c]; h * w];
    for row in 0..h as isize {
        for col in 0..w as isize {
            for ch in 0..c {
                let mut s = 0.0;
                for dy in 0..k as isize {
                    for dx in 0..k as isize {
                        let (sy, sx) = (row + dy - r, col + dx - r);
                        if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                            continue;
                        }
                        let tap = kernels.data()[ch * k * k + (dy as usize) * k + dx as usize];
                        s += tap * x[(sy * w as isize + sx) as usize][ch];
                    }
                }
                out[(row * w as isize + col) as usize][ch] = s;
            }
        }
    }
    out
}

fn head_from(q: &Mat, k: &Mat, v: &Mat, g: &Mat, lambda: &[f64], gate: GateKind) -> Mat {
    let half = q[0].len() / 2;
    let a1 = linear_attn(&cols(q, 0, half), &cols(k, 0, half), v);
    let a2 = linear_attn(&cols(q, half, 2 * half), &cols(k, half, 2 * half), v);
    let diff: Mat = a1
        .iter()
        .zip(&a2)
        .map(|(r1, r2)| {
            r1.iter()
                .zip(r2)
                .zip(lambda)
                .map(|((x, y), l)| x - l * y)
                .collect()
        })
        .collect();
    let act = match gate {
        GateKind::Silu => silu as fn(f64) -> f64,
        GateKind::Sigmoid => sigmoid,
    };
    zip(&rmsnorm(&diff), &elementwise(g, act), |a, b| a * b)
}

fn head(x: &Mat, p: &GdlaHeadParams, gate: GateKind) -> Mat {
    head_from(
        &mm(x, &mat(&p.w_q)),
        &mm(x, &mat(&p.w_k)),
        &mm(x, &mat(&p.w_v)),
        &mm(x, &mat(&p.w_g)),
        &p.lambda,
        gate,
    )
}

fn local(
    x: &Mat,
    grid: GridShape,
    heads: &[GdlaHeadParams],
    m: &LocalMixers,
    gate: GateKind,
) -> Mat {
    let (h, w) = (grid.height, grid.width);
    let path = |pick: fn(&GdlaHeadParams) -> &Tensor, mixer: &gdla::mixer::LocalMixer| {
        let parts: Vec<Mat> = heads.iter().map(|p| mm(x, &mat(pick(p)))).collect();
        mm(&dwconv(&hcat(&parts), h, w, &mixer.dw), &mat(&mixer.pw))
    };
    let q = path(|p| &p.w_q, &m.q);
    let k = path(|p| &p.w_k, &m.k);
    let v = path(|p| &p.w_v, &m.v);
    let g = path(|p| &p.w_g, &m.g);
    let dh = heads[0].w_q.cols();
    let outs: Vec<Mat> = heads
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (a, b) = (i * dh, (i + 1) * dh);
            head_from(
                &cols(&q, a, b),
                &cols(&k, a, b),
                &cols(&v, a, b),
                &cols(&g, a, b),
                &p.lambda,
                gate,
            )
        })
        .collect();
    hcat(&outs)
}

fn ffn(x: &Mat, grid: GridShape, weights: &FfnWeights) -> Mat {
    match weights {
        FfnWeights::Mlp { w1, w2 } => mm(&elementwise(&mm(x, &mat(w1)), silu), &mat(w2)),
        FfnWeights::SwiGlu { w1, w2, w3 } => {
            let a = elementwise(&mm(x, &mat(w1)), silu);
            let b = mm(x, &mat(w2));
            mm(&zip(&a, &b, |p, q| p * q), &mat(w3))
        }
        FfnWeights::MixFfn { w_in, dw, w_out } => {
            let hidden = dwconv(
                &elementwise(&mm(x, &mat(w_in)), silu),
                grid.height,
                grid.width,
                dw,
            );
            let half = hidden[0].len() / 2;
            let x_hat = cols(&hidden, 0, half);
            let gate = elementwise(&cols(&hidden, half, 2 * half), silu);
            mm(&zip(&x_hat, &gate, |p, q| p * q), &mat(w_out))
        }
    }
}

#[test]
fn matmul_matches_triple_loop() {
    let mut rng = Rng::new(1);
    for (n, k, m) in [(1, 1, 1), (3, 5, 2), (7, 4, 9), (16, 16, 16)] {
        let a = rng.gaussian_matrix(n, k);
        let b = rng.gaussian_matrix(k, m);
        let got = matmul(&a, &b).unwrap();
        assert!(max_diff(&mm(&mat(&a), &mat(&b)), &got) <= 1e-15);
    }
}

#[test]
fn dwconv_matches_four_loop_oracle() {
    let grid = GridShape::new(6, 6).unwrap();
    for (seed, k) in [(3u64, 3usize), (4, 5)] {
        let mut rng = Rng::new(seed);
        let x = rng.gaussian_matrix(36, 4);
        let taps = (0..4 * k * k).map(|_| rng.gaussian()).collect();
        let kernels = Tensor::new(vec![4, k, k], taps).unwrap();
        let got = dwconv2d(&x, grid, &kernels).unwrap();
        assert!(max_diff(&dwconv(&mat(&x), 6, 6, &kernels), &got) <= 1e-14);
    }
}

#[test]
fn attention_kernels_match_per_query_loops() {
    let mut rng = Rng::new(5);
    let q = rng.gaussian_matrix(11, 6);
    let k = rng.gaussian_matrix(11, 6);
    let v = rng.gaussian_matrix(11, 3);
    let (mq, mk, mv) = (mat(&q), mat(&k), mat(&v));
    let soft = softmax_attention(&q, &k, &v).unwrap();
    assert!(max_diff(&softmax_attn(&mq, &mk, &mv), &soft) <= 1e-13);
    for mode in [LinearMode::Associative, LinearMode::Quadratic] {
        let lin = linear_attention(&q, &k, &v, mode).unwrap();
        assert!(max_diff(&linear_attn(&mq, &mk, &mv), &lin) <= 1e-13);
    }
}

#[test]
fn gated_head_and_multihead_match_composition() {
    for gate in [GateKind::Silu, GateKind::Sigmoid] {
        let cfg = HeadConfig::new(8, 2, 4).unwrap().with_gate(gate);
        let mut rng = Rng::new(6);
        let heads: Vec<_> = (0..2)
            .map(|_| {
                let mut p = GdlaHeadParams::init(&cfg, &mut rng).unwrap();
                p.lambda = (0..4).map(|_| rng.uniform()).collect();
                p
            })
            .collect();
        let x = rng.gaussian_matrix(10, 8);
        let mx = mat(&x);
        let one = gated_head(&x, &heads[0], &cfg).unwrap();
        assert!(max_diff(&head(&mx, &heads[0], gate), &one) <= 1e-12);
        let all = gdla_multihead(&x, &heads, &cfg).unwrap();
        let want = hcat(&[head(&mx, &heads[0], gate), head(&mx, &heads[1], gate)]);
        assert!(max_diff(&want, &all) <= 1e-12);
    }
}

#[test]
fn local_branch_matches_composition() {
    let cfg = HeadConfig::new(8, 2, 4).unwrap();
    let grid = GridShape::new(3, 4).unwrap();
    for k in [3, 5] {
        let mut rng = Rng::new(7);
        let heads: Vec<_> = (0..2)
            .map(|_| GdlaHeadParams::init(&cfg, &mut rng).unwrap())
            .collect();
        let mixers = LocalMixers::init(8, k, &mut rng).unwrap();
        let x = rng.gaussian_matrix(12, 8);
        let got = local_branch(&x, grid, &heads, &mixers, &cfg).unwrap();
        let want = local(&mat(&x), grid, &heads, &mixers, cfg.gate);
        assert!(max_diff(&want, &got) <= 1e-12);
    }
}

#[test]
fn ffn_variants_match_composition() {
    let grid = GridShape::new(4, 3).unwrap();
    for kind in FfnKind::ALL {
        let cfg = FfnConfig::new(kind);
        let mut rng = Rng::new(8);
        let w = FfnWeights::init(&cfg, 6, &mut rng).unwrap();
        let x = rng.gaussian_matrix(12, 6);
        let got = ffn_forward(&x, Some(grid), &cfg, &w).unwrap();
        assert!(max_diff(&ffn(&mat(&x), grid, &w), &got) <= 1e-12, "{kind}");
    }
}

#[test]
fn gdla_block_matches_composition() {
    let grid = GridShape::new(4, 4).unwrap();
    let head_cfg = HeadConfig::new(8, 2, 4).unwrap();
    for kind in FfnKind::ALL {
        let block = Block::init(BlockConfig::gdla(head_cfg, FfnConfig::new(kind)), 9).unwrap();
        let TokenMixer::Gdla(m) = &block.mixer else {
            panic!("expected a gdla mixer")
        };
        let x = Rng::new(10).gaussian_matrix(16, 8);
        let mx = mat(&x);
        let xn = rmsnorm(&mx);
        let global = hcat(
            &m.global
                .iter()
                .map(|p| head(&xn, p, head_cfg.gate))
                .collect::<Vec<_>>(),
        );
        let loc = local(&xn, grid, &m.local, &m.local_mix, head_cfg.gate);
        let update = mm(&hcat(&[global, loc]), &mat(&m.w_o));
        let mixed = zip(&mx, &update, |a, b| a + b);
        let out = zip(&mixed, &ffn(&rmsnorm(&mixed), grid, &block.ffn), |a, b| {
            a + b
        });
        let got = block.forward(&x, grid).unwrap();
        assert!(max_diff(&out, &got) <= 1e-12, "{kind}");
    }
}
