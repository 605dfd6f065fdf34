//! Versioned text format for trained networks.
//!
//! The file is line oriented and fully self-describing:
//!
//! ```text
//! gazebench-model v1
//! kind regression
//! dims 6 32 16 2
//! input_mean m0 ... m5
//! input_std s0 ... s5
//! target_scale 800 600
//! layer 0 32 6
//! w w00 ... w05          (one line per output unit)
//! ...
//! b b0 ... b31
//! layer 1 16 32
//! ...
//! end
//! ```
//!
//! Floats are written with 17 significant digits so a round trip restores
//! bit-identical parameters. `target_scale` only appears on regression
//! models that have been trained.

use crate::error::{Error, Result};
use crate::formats::fmt_f64;
use crate::nnmap::{Layer, NetworkSpec, OutputKind, Standardizer, TrainedNet};

const MAGIC: &str = "gazebench-model v1";

/// The largest layer width the parser will allocate for. Real models top
/// out in the hundreds; anything bigger is a corrupt or hostile file.
const MAX_WIDTH: usize = 1 << 16;

pub fn write_model(net: &TrainedNet) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(match net.spec.output_kind {
        OutputKind::Regression => "kind regression\n",
        OutputKind::Classification => "kind classification\n",
    });
    out.push_str("dims");
    for d in net.spec.dims() {
        out.push_str(&format!(" {d}"));
    }
    out.push('\n');
    push_floats(&mut out, "input_mean", &net.input_norm.mean);
    push_floats(&mut out, "input_std", &net.input_norm.std);
    if let Some(scale) = net.target_scale {
        push_floats(&mut out, "target_scale", &scale);
    }
    for (i, layer) in net.layers.iter().enumerate() {
        out.push_str(&format!("layer {i} {} {}\n", layer.out_dim, layer.in_dim));
        for o in 0..layer.out_dim {
            push_floats(&mut out, "w", &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim]);
        }
        push_floats(&mut out, "b", &layer.biases);
    }
    out.push_str("end\n");
    out
}

fn push_floats(out: &mut String, tag: &str, vals: &[f64]) {
    out.push_str(tag);
    for v in vals {
        out.push(' ');
        out.push_str(&fmt_f64(*v));
    }
    out.push('\n');
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line_no: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        match self.iter.next() {
            Some((idx, line)) => {
                self.line_no = idx + 1;
                Ok(line.trim_end())
            }
            None => Err(Error::parse(self.line_no + 1, "unexpected end of model file")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.line_no, msg.into())
    }
}

fn parse_floats(line_no: usize, line: &str, tag: &str, expect: usize) -> Result<Vec<f64>> {
    let rest = line
        .strip_prefix(tag)
        .ok_or_else(|| Error::parse(line_no, format!("expected `{tag}` line, found `{line}`")))?;
    let mut vals = Vec::with_capacity(expect);
    for tok in rest.split_whitespace() {
        let v: f64 =
            tok.parse().map_err(|_| Error::parse(line_no, format!("bad float `{tok}`")))?;
        vals.push(v);
    }
    if vals.len() != expect {
        return Err(Error::parse(
            line_no,
            format!("`{tag}` carries {} values, expected {expect}", vals.len()),
        ));
    }
    Ok(vals)
}

pub fn parse_model(text: &str) -> Result<TrainedNet> {
    let mut lines = Lines { iter: text.lines().enumerate(), line_no: 0 };

    if lines.next()? != MAGIC {
        return Err(lines.err(format!("missing `{MAGIC}` header")));
    }

    let kind_line = lines.next()?;
    let output_kind = match kind_line {
        "kind regression" => OutputKind::Regression,
        "kind classification" => OutputKind::Classification,
        other => return Err(lines.err(format!("unknown kind line `{other}`"))),
    };

    let dims_line = lines.next()?;
    let rest = dims_line
        .strip_prefix("dims")
        .ok_or_else(|| lines.err("expected `dims` line"))?;
    let mut dims = Vec::new();
    for tok in rest.split_whitespace() {
        let d: usize = tok.parse().map_err(|_| lines.err(format!("bad dimension `{tok}`")))?;
        if d == 0 || d > MAX_WIDTH {
            return Err(lines.err(format!("dimension {d} out of range")));
        }
        dims.push(d);
    }
    if dims.len() < 2 {
        return Err(lines.err("model needs at least an input and an output layer"));
    }
    let input_dim = dims[0];
    let output_dim = *dims.last().unwrap();
    let hidden_dims = dims[1..dims.len() - 1].to_vec();

    let mean_line = lines.next()?;
    let mean = parse_floats(lines.line_no, mean_line, "input_mean", input_dim)?;
    let std_line = lines.next()?;
    let std = parse_floats(lines.line_no, std_line, "input_std", input_dim)?;
    if std.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(lines.err("input_std entries must be positive"));
    }

    let mut line = lines.next()?;
    let mut target_scale = None;
    if line.starts_with("target_scale") {
        if output_kind != OutputKind::Regression {
            return Err(lines.err("target_scale only applies to regression models"));
        }
        let vals = parse_floats(lines.line_no, line, "target_scale", 2)?;
        if vals.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(lines.err("target_scale entries must be positive"));
        }
        target_scale = Some([vals[0], vals[1]]);
        line = lines.next()?;
    }

    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (li, pair) in dims.windows(2).enumerate() {
        let (in_dim, out_dim) = (pair[0], pair[1]);
        let expect_header = format!("layer {li} {out_dim} {in_dim}");
        if line != expect_header {
            return Err(lines.err(format!("expected `{expect_header}`, found `{line}`")));
        }
        let mut weights = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..out_dim {
            let w_line = lines.next()?;
            weights.extend(parse_floats(lines.line_no, w_line, "w", in_dim)?);
        }
        let b_line = lines.next()?;
        let biases = parse_floats(lines.line_no, b_line, "b", out_dim)?;
        layers.push(Layer { in_dim, out_dim, weights, biases });
        line = lines.next()?;
    }

    if line != "end" {
        return Err(lines.err(format!("expected `end`, found `{line}`")));
    }

    Ok(TrainedNet {
        spec: NetworkSpec { input_dim, hidden_dims, output_dim, output_kind },
        layers,
        input_norm: Standardizer { mean, std },
        target_scale,
        report: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnmap::{forward, init_network};

    fn sample_net(kind: OutputKind) -> TrainedNet {
        let spec = NetworkSpec {
            input_dim: 3,
            hidden_dims: vec![5, 4],
            output_dim: if kind == OutputKind::Regression { 2 } else { 6 },
            output_kind: kind,
        };
        let mut net = init_network(spec, 77).unwrap();
        net.input_norm = Standardizer {
            mean: vec![0.1, -0.2, 0.05],
            std: vec![1.5, 0.7, 2.0],
        };
        if kind == OutputKind::Regression {
            net.target_scale = Some([800.0, 600.0]);
        }
        net
    }

    #[test]
    fn model_round_trips_bit_exactly() {
        for kind in [OutputKind::Regression, OutputKind::Classification] {
            let net = sample_net(kind);
            let text = write_model(&net);
            let back = parse_model(&text).unwrap();
            assert_eq!(back.spec, net.spec);
            assert_eq!(back.layers, net.layers);
            assert_eq!(back.input_norm, net.input_norm);
            assert_eq!(back.target_scale, net.target_scale);
            let x = [0.3, -0.9, 1.7];
            assert_eq!(forward(&net, &x).unwrap(), forward(&back, &x).unwrap());
        }
    }

    #[test]
    fn writer_is_deterministic() {
        let net = sample_net(OutputKind::Regression);
        assert_eq!(write_model(&net), write_model(&net));
    }

    #[test]
    fn missing_header_is_rejected() {
        assert!(parse_model("").is_err());
        assert!(parse_model("some other file\n").is_err());
    }

    #[test]
    fn truncated_file_reports_position() {
        let net = sample_net(OutputKind::Regression);
        let text = write_model(&net);
        let cut: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        match parse_model(&cut) {
            Err(Error::Parse { line, .. }) => assert!(line >= 6),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_counts_are_rejected() {
        let net = sample_net(OutputKind::Regression);
        let text = write_model(&net);
        let tampered = text.replace("dims 3 5 4 2", "dims 3 5 4 7");
        assert!(parse_model(&tampered).is_err());
    }

    #[test]
    fn hostile_dimensions_are_rejected() {
        let text = "gazebench-model v1\nkind regression\ndims 99999999 2\n";
        assert!(parse_model(text).is_err());
    }

    #[test]
    fn classification_rejects_target_scale() {
        let net = sample_net(OutputKind::Classification);
        let text = write_model(&net);
        let spliced: String = text
            .lines()
            .map(|l| {
                if l.starts_with("input_std") {
                    format!("{l}\ntarget_scale 8.0e2 6.0e2\n")
                } else {
                    format!("{l}\n")
                }
            })
            .collect();
        assert!(parse_model(&spliced).is_err());
    }
}
