use serde::{Deserialize, Serialize};

use super::ops::{conv1d_len, conv_transpose1d_len};
use super::WeightStore;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One 1-D convolution of the cut network. Transposed layers store weights
/// as `[in, out, kernel]`, the others as `[out, in, kernel]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv1dLayer {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv1dLayer {
    fn new(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        Self {
            name: name.to_string(),
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        }
    }
}

/// Network geometry shared with the training side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    /// Rows of the resized page fed to both networks.
    pub input_height: usize,
    pub input_width: usize,
    /// U-Net channels at full, half and quarter resolution.
    pub unet_channels: [usize; 3],
    pub cutnet_down: Vec<Conv1dLayer>,
    pub cutnet_mix_channels: usize,
    pub cutnet_mid: Conv1dLayer,
    pub cutnet_up: Vec<Conv1dLayer>,
}

impl Default for NetSpec {
    fn default() -> Self {
        Self::with_input(512, 384)
    }
}

/// Name, shape and initialization hints of one tensor required by a spec.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub fan_in: usize,
    #[serde(skip)]
    pub is_bias: bool,
}

impl NetSpec {
    /// Default architecture at a different input size.
    pub fn with_input(input_height: usize, input_width: usize) -> Self {
        Self {
            input_height,
            input_width,
            unet_channels: [8, 16, 32],
            cutnet_down: vec![
                Conv1dLayer::new("v1", 1, 8, 5, 2, 2),
                Conv1dLayer::new("v2", 8, 16, 5, 2, 2),
                Conv1dLayer::new("v3", 16, 32, 5, 2, 2),
                Conv1dLayer::new("v4", 32, 32, 5, 1, 2),
            ],
            cutnet_mix_channels: 32,
            cutnet_mid: Conv1dLayer::new("v5", 32, 32, 3, 1, 1),
            cutnet_up: vec![
                Conv1dLayer::new("u1", 32, 16, 4, 2, 1),
                Conv1dLayer::new("u2", 16, 8, 4, 2, 1),
                Conv1dLayer::new("u3", 8, 1, 4, 2, 1),
            ],
        }
    }

    /// Checks that every layer chain is shape-consistent end to end.
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(format!("net spec: {msg}")));
        if self.input_height == 0 || self.input_width == 0 {
            return bad("empty input".into());
        }
        if !self.input_height.is_multiple_of(4) || !self.input_width.is_multiple_of(4) {
            return bad(format!(
                "input {}x{} not divisible by 4",
                self.input_height, self.input_width
            ));
        }
        if self.unet_channels.contains(&0) {
            return bad("zero U-Net channels".into());
        }
        let mut channels = 1;
        let mut len = self.input_height;
        let step =
            |layer: &Conv1dLayer, transposed: bool, channels: &mut usize, len: &mut usize| {
                if layer.in_channels != *channels {
                    return bad(format!(
                        "layer {} takes {} channels, chain provides {}",
                        layer.name, layer.in_channels, channels
                    ));
                }
                if layer.out_channels == 0 || layer.kernel == 0 || layer.stride == 0 {
                    return bad(format!("layer {} has a zero size", layer.name));
                }
                let next = if transposed {
                    conv_transpose1d_len(*len, layer.kernel, layer.stride, layer.padding)
                } else {
                    conv1d_len(*len, layer.kernel, layer.stride, layer.padding)
                };
                match next {
                    Some(n) if n > 0 => {
                        *len = n;
                        *channels = layer.out_channels;
                        Ok(())
                    }
                    _ => bad(format!("layer {} produces an empty signal", layer.name)),
                }
            };
        for layer in &self.cutnet_down {
            step(layer, false, &mut channels, &mut len)?;
        }
        if self.cutnet_mix_channels == 0 {
            return bad("zero mixing channels".into());
        }
        channels = self.cutnet_mix_channels;
        step(&self.cutnet_mid, false, &mut channels, &mut len)?;
        for layer in &self.cutnet_up {
            step(layer, true, &mut channels, &mut len)?;
        }
        if channels != 1 || len != self.input_height {
            return bad(format!(
                "cut network ends with {channels} channels of length {len}, expected 1 x {}",
                self.input_height
            ));
        }
        let mut names: Vec<&str> = self.cutnet_layers().map(|(l, _)| l.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate layer names".into());
        }
        Ok(())
    }

    pub(crate) fn cutnet_layers(&self) -> impl Iterator<Item = (&Conv1dLayer, bool)> {
        self.cutnet_down
            .iter()
            .map(|l| (l, false))
            .chain(std::iter::once((&self.cutnet_mid, false)))
            .chain(self.cutnet_up.iter().map(|l| (l, true)))
    }

    /// Every tensor the networks read, in file order.
    pub fn tensors(&self) -> Vec<TensorSpec> {
        let mut out = Vec::new();
        let mut push = |name: String, shape: Vec<usize>, fan_in: usize, is_bias: bool| {
            out.push(TensorSpec {
                name,
                shape,
                fan_in,
                is_bias,
            })
        };
        let [c1, c2, c3] = self.unet_channels;
        let convs = [
            ("enc1.conv1", c1, 1),
            ("enc1.conv2", c1, c1),
            ("enc2.conv1", c2, c1),
            ("enc2.conv2", c2, c2),
            ("enc3.conv1", c3, c2),
            ("enc3.conv2", c3, c3),
            ("dec2.conv1", c2, 2 * c2),
            ("dec2.conv2", c2, c2),
            ("dec1.conv1", c1, 2 * c1),
            ("dec1.conv2", c1, c1),
        ];
        let ups = [("up2", c3, c2), ("up1", c2, c1)];
        for (name, o, i) in &convs[..6] {
            push(
                format!("unet.{name}.weight"),
                vec![*o, *i, 3, 3],
                i * 9,
                false,
            );
            push(format!("unet.{name}.bias"), vec![*o], 0, true);
        }
        for (k, (name, i, o)) in ups.iter().enumerate() {
            push(
                format!("unet.{name}.weight"),
                vec![*i, *o, 2, 2],
                i * 4,
                false,
            );
            push(format!("unet.{name}.bias"), vec![*o], 0, true);
            for (cname, co, ci) in &convs[6 + 2 * k..8 + 2 * k] {
                push(
                    format!("unet.{cname}.weight"),
                    vec![*co, *ci, 3, 3],
                    ci * 9,
                    false,
                );
                push(format!("unet.{cname}.bias"), vec![*co], 0, true);
            }
        }
        push("unet.out.weight".into(), vec![1, c1, 1, 1], c1, false);
        push("unet.out.bias".into(), vec![1], 0, true);

        push(
            "cutnet.w1".into(),
            vec![self.input_height],
            self.input_height * self.input_width,
            false,
        );
        push("cutnet.b1".into(), vec![1], 0, true);
        for layer in &self.cutnet_down {
            push_conv1d(&mut push, layer, false);
        }
        let m = self.cutnet_mix_channels;
        push("cutnet.w2".into(), vec![m, m], m, false);
        push("cutnet.b2".into(), vec![m], 0, true);
        push_conv1d(&mut push, &self.cutnet_mid, false);
        for layer in &self.cutnet_up {
            push_conv1d(&mut push, layer, true);
        }
        out
    }

    /// Requires `store` to hold exactly the tensors of this spec with
    /// matching shapes.
    pub fn validate<T: Scalar>(&self, store: &WeightStore<T>) -> Result<()> {
        self.check()?;
        let expected = self.tensors();
        for t in &expected {
            let got = store.require(&t.name)?;
            if got.dims() != t.shape.as_slice() {
                return Err(Error::TensorShape {
                    name: t.name.clone(),
                    reason: format!("shape {:?}, expected {:?}", got.dims(), t.shape),
                });
            }
        }
        if let Some(extra) = store
            .names()
            .find(|n| !expected.iter().any(|t| t.name == *n))
        {
            return Err(Error::UnexpectedTensor(extra.to_string()));
        }
        Ok(())
    }

    /// The spec together with its tensor table, as written for the trainer.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Full<'a> {
            #[serde(flatten)]
            spec: &'a NetSpec,
            tensors: Vec<TensorSpec>,
        }
        Ok(serde_json::to_string_pretty(&Full {
            spec: self,
            tensors: self.tensors(),
        })?)
    }
}

fn push_conv1d(
    push: &mut impl FnMut(String, Vec<usize>, usize, bool),
    layer: &Conv1dLayer,
    transposed: bool,
) {
    let shape = if transposed {
        vec![layer.in_channels, layer.out_channels, layer.kernel]
    } else {
        vec![layer.out_channels, layer.in_channels, layer.kernel]
    };
    push(
        format!("cutnet.{}.weight", layer.name),
        shape,
        layer.in_channels * layer.kernel,
        false,
    );
    push(
        format!("cutnet.{}.bias", layer.name),
        vec![layer.out_channels],
        0,
        true,
    );
}
