//! Direct per-output reference implementations of the network layers.
#![allow(dead_code, clippy::needless_range_loop)]

use visionseg_core::neural::{NetSpec, WeightStore};

/// Feature map indexed `[channel][row][col]`.
pub type Map = Vec<Vec<Vec<f64>>>;

fn w<'a>(store: &'a WeightStore<f64>, name: &str) -> &'a [f64] {
    store
        .get(name)
        .unwrap_or_else(|| panic!("missing {name}"))
        .data()
}

pub fn conv3x3(x: &Map, store: &WeightStore<f64>, name: &str, relu: bool) -> Map {
    let weight = w(store, &format!("{name}.weight"));
    let bias = w(store, &format!("{name}.bias"));
    let (c_in, h, wd) = (x.len(), x[0].len(), x[0][0].len());
    let c_out = bias.len();
    let mut out = vec![vec![vec![0.0; wd]; h]; c_out];
    for o in 0..c_out {
        for r in 0..h {
            for c in 0..wd {
                let mut acc = bias[o];
                for ci in 0..c_in {
                    for dy in 0..3 {
                        for dx in 0..3 {
                            let (rr, cc) = (r as i64 + dy as i64 - 1, c as i64 + dx as i64 - 1);
                            if rr < 0 || cc < 0 || rr >= h as i64 || cc >= wd as i64 {
                                continue;
                            }
                            acc += weight[((o * c_in + ci) * 3 + dy) * 3 + dx]
                                * x[ci][rr as usize][cc as usize];
                        }
                    }
                }
                out[o][r][c] = if relu { acc.max(0.0) } else { acc };
            }
        }
    }
    out
}

pub fn pool(x: &Map) -> Map {
    x.iter()
        .map(|plane| {
            (0..plane.len() / 2)
                .map(|r| {
                    (0..plane[0].len() / 2)
                        .map(|c| {
                            let v = [
                                plane[2 * r][2 * c],
                                plane[2 * r][2 * c + 1],
                                plane[2 * r + 1][2 * c],
                                plane[2 * r + 1][2 * c + 1],
                            ];
                            v.into_iter().fold(f64::NEG_INFINITY, f64::max)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Stride-2, 2x2 transposed convolution: each output pixel reads exactly one
/// input pixel.
pub fn upconv(x: &Map, store: &WeightStore<f64>, name: &str) -> Map {
    let weight = w(store, &format!("{name}.weight"));
    let bias = w(store, &format!("{name}.bias"));
    let (c_in, h, wd) = (x.len(), x[0].len(), x[0][0].len());
    let c_out = bias.len();
    let mut out = vec![vec![vec![0.0; 2 * wd]; 2 * h]; c_out];
    for o in 0..c_out {
        for r in 0..2 * h {
            for c in 0..2 * wd {
                let mut acc = bias[o];
                for ci in 0..c_in {
                    acc += x[ci][r / 2][c / 2] * weight[((ci * c_out + o) * 2 + r % 2) * 2 + c % 2];
                }
                out[o][r][c] = acc;
            }
        }
    }
    out
}

pub fn unet(img: &[Vec<f64>], store: &WeightStore<f64>) -> Vec<Vec<f64>> {
    let x: Map = vec![img.to_vec()];
    let e1 = conv3x3(
        &conv3x3(&x, store, "unet.enc1.conv1", true),
        store,
        "unet.enc1.conv2",
        true,
    );
    let p1 = pool(&e1);
    let e2 = conv3x3(
        &conv3x3(&p1, store, "unet.enc2.conv1", true),
        store,
        "unet.enc2.conv2",
        true,
    );
    let p2 = pool(&e2);
    let e3 = conv3x3(
        &conv3x3(&p2, store, "unet.enc3.conv1", true),
        store,
        "unet.enc3.conv2",
        true,
    );
    let mut cat2 = e2.clone();
    cat2.extend(upconv(&e3, store, "unet.up2"));
    let d2 = conv3x3(
        &conv3x3(&cat2, store, "unet.dec2.conv1", true),
        store,
        "unet.dec2.conv2",
        true,
    );
    let mut cat1 = e1.clone();
    cat1.extend(upconv(&d2, store, "unet.up1"));
    let d1 = conv3x3(
        &conv3x3(&cat1, store, "unet.dec1.conv1", true),
        store,
        "unet.dec1.conv2",
        true,
    );
    let ow = w(store, "unet.out.weight");
    let ob = w(store, "unet.out.bias")[0];
    (0..img.len())
        .map(|r| {
            (0..img[0].len())
                .map(|c| ob + (0..d1.len()).map(|k| ow[k] * d1[k][r][c]).sum::<f64>())
                .collect()
        })
        .collect()
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn subtract(x: &[Vec<f64>], store: &WeightStore<f64>) -> Vec<Vec<f64>> {
    let w1 = w(store, "cutnet.w1");
    let b1 = w(store, "cutnet.b1")[0];
    let mut s = b1;
    for (r, row) in x.iter().enumerate() {
        for v in row {
            s += w1[r] * v;
        }
    }
    let s = s.max(0.0);
    x.iter()
        .map(|row| row.iter().map(|v| sigmoid(v - s)).collect())
        .collect()
}

/// `out[o][t] = b[o] + sum_{c, k} w[o][c][k] * x[c][t * stride + k - pad]`.
pub fn conv1d(
    x: &[Vec<f64>],
    weight: &[f64],
    bias: &[f64],
    k: usize,
    stride: usize,
    pad: usize,
) -> Vec<Vec<f64>> {
    let (c_in, len) = (x.len(), x[0].len());
    let c_out = bias.len();
    let out_len = (len + 2 * pad - k) / stride + 1;
    (0..c_out)
        .map(|o| {
            (0..out_len)
                .map(|t| {
                    let mut acc = bias[o];
                    for c in 0..c_in {
                        for kk in 0..k {
                            let i = (t * stride + kk) as i64 - pad as i64;
                            if i >= 0 && (i as usize) < len {
                                acc += weight[(o * c_in + c) * k + kk] * x[c][i as usize];
                            }
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// `out[o][t] = b[o] + sum over (c, i, k) with i * stride + k - pad == t of
/// w[c][o][k] * x[c][i]`.
pub fn conv_transpose1d(
    x: &[Vec<f64>],
    weight: &[f64],
    bias: &[f64],
    k: usize,
    stride: usize,
    pad: usize,
) -> Vec<Vec<f64>> {
    let (c_in, len) = (x.len(), x[0].len());
    let c_out = bias.len();
    let out_len = (len - 1) * stride + k - 2 * pad;
    (0..c_out)
        .map(|o| {
            (0..out_len)
                .map(|t| {
                    let mut acc = bias[o];
                    for c in 0..c_in {
                        for kk in 0..k {
                            let num = t as i64 + pad as i64 - kk as i64;
                            if num < 0 || num % stride as i64 != 0 {
                                continue;
                            }
                            let i = (num / stride as i64) as usize;
                            if i < len {
                                acc += weight[(c * c_out + o) * k + kk] * x[c][i];
                            }
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

pub fn classify(y: &[Vec<f64>], store: &WeightStore<f64>, spec: &NetSpec) -> Vec<f64> {
    let mut h: Vec<Vec<f64>> = vec![y.iter().map(|row| row.iter().sum()).collect()];
    for l in &spec.cutnet_down {
        let name = format!("cutnet.{}", l.name);
        h = conv1d(
            &h,
            w(store, &format!("{name}.weight")),
            w(store, &format!("{name}.bias")),
            l.kernel,
            l.stride,
            l.padding,
        );
    }
    for row in h.iter_mut() {
        for v in row.iter_mut() {
            *v = v.tanh();
        }
    }
    let w2 = w(store, "cutnet.w2");
    let b2 = w(store, "cutnet.b2");
    let m = b2.len();
    h = (0..m)
        .map(|o| {
            (0..h[0].len())
                .map(|t| b2[o] + (0..h.len()).map(|c| h[c][t] * w2[c * m + o]).sum::<f64>())
                .collect()
        })
        .collect();
    let mid = &spec.cutnet_mid;
    let name = format!("cutnet.{}", mid.name);
    h = conv1d(
        &h,
        w(store, &format!("{name}.weight")),
        w(store, &format!("{name}.bias")),
        mid.kernel,
        mid.stride,
        mid.padding,
    );
    for l in &spec.cutnet_up {
        let name = format!("cutnet.{}", l.name);
        h = conv_transpose1d(
            &h,
            w(store, &format!("{name}.weight")),
            w(store, &format!("{name}.bias")),
            l.kernel,
            l.stride,
            l.padding,
        );
    }
    h[0].iter().map(|&v| sigmoid(v)).collect()
}
