//! Checkpoint persistence.
//!
//! Text header plus named binary blocks of little-endian 32-bit floats:
//!
//! ```text
//! SAMS v1
//! dim <d> senses <n> encoder <kind> vocab <V>
//! <token>\t<count>            (V lines)
//! block <name> <rows> <cols>  (then rows·cols f32 values)
//! ...
//! ```
//!
//! Training runs in 64-bit; storage truncates to 32-bit, so a loaded
//! model re-saves to byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::composition::{CompositionLayer, LstmCell};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::model::{Encoder, EncoderKind, Model};
use crate::objective::PlausibilityScorer;
use crate::optim::ParamStore;
use crate::senses::MultiSenseEntry;
use crate::siamese::{CosineCostParams, CostKind, DisambiguationMode, LogisticClassifier, TaskState};
use crate::tensor::Tensor;

const MAGIC: &str = "SAMS v1";

fn write_block(
    out: &mut impl Write,
    path: &Path,
    name: &str,
    rows: usize,
    cols: usize,
    data: &[f64],
) -> Result<()> {
    debug_assert_eq!(rows * cols, data.len(), "block {name}");
    writeln!(out, "block {name} {rows} {cols}").map_err(|e| Error::io(path, e))?;
    for &v in data {
        out.write_all(&(v as f32).to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

struct Block {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn read_block(reader: &mut impl BufRead, path: &Path) -> Result<Option<Block>> {
    let mut line = String::new();
    let n = reader
        .read_line(&mut line)
        .map_err(|e| Error::io(path, e))?;
    if n == 0 {
        return Ok(None);
    }
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "block" {
        return Err(Error::Format(format!("bad block header: {}", line.trim())));
    }
    let name = parts[1].to_string();
    let rows: usize = parts[2]
        .parse()
        .map_err(|_| Error::Format(format!("bad row count in block {name}")))?;
    let cols: usize = parts[3]
        .parse()
        .map_err(|_| Error::Format(format!("bad column count in block {name}")))?;
    let mut bytes = vec![0u8; rows * cols * 4];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| Error::Format(format!("truncated block {name}")))?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(Some(Block {
        name,
        rows,
        cols,
        data,
    }))
}

fn gather_rows(store: &ParamStore, ids: impl Iterator<Item = crate::optim::ParamId>) -> Vec<f64> {
    let mut out = Vec::new();
    for id in ids {
        out.extend_from_slice(store.value(id).data());
    }
    out
}

/// Write the model to `path`.
pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let v = model.vocab.size();
    let (d, n) = (model.dim, model.n_senses);
    writeln!(out, "{MAGIC}").map_err(|e| Error::io(path, e))?;
    writeln!(
        out,
        "dim {d} senses {n} encoder {} vocab {v}",
        model.encoder.kind().as_str()
    )
    .map_err(|e| Error::io(path, e))?;
    for (token, count) in model.vocab.entries() {
        writeln!(out, "{token}\t{count}").map_err(|e| Error::io(path, e))?;
    }

    let store = &model.store;
    write_block(
        &mut out,
        path,
        "main",
        v,
        d,
        &gather_rows(store, model.entries.iter().map(|e| e.main)),
    )?;
    write_block(
        &mut out,
        path,
        "centroids",
        v * n,
        d,
        &gather_rows(store, model.entries.iter().flat_map(|e| e.centroids.iter().copied())),
    )?;
    write_block(
        &mut out,
        path,
        "senses",
        v * n,
        d,
        &gather_rows(store, model.entries.iter().flat_map(|e| e.senses.iter().copied())),
    )?;
    let counts: Vec<f64> = model
        .entries
        .iter()
        .flat_map(|e| e.centroid_counts.iter().map(|&c| c as f64))
        .collect();
    write_block(&mut out, path, "centroid_counts", v, n, &counts)?;

    match &model.encoder {
        Encoder::RecNn(layer) => {
            write_block(&mut out, path, "comp_w", d, 2 * d, store.value(layer.w).data())?;
            write_block(&mut out, path, "comp_b", 1, d, store.value(layer.b).data())?;
        }
        Encoder::Rnn(cell) => {
            for (name, id) in [
                ("lstm_wi", cell.w_i),
                ("lstm_wf", cell.w_f),
                ("lstm_wo", cell.w_o),
                ("lstm_wc", cell.w_c),
            ] {
                write_block(&mut out, path, name, d, 2 * d, store.value(id).data())?;
            }
            for (name, id) in [
                ("lstm_bi", cell.b_i),
                ("lstm_bf", cell.b_f),
                ("lstm_bo", cell.b_o),
                ("lstm_bc", cell.b_c),
            ] {
                write_block(&mut out, path, name, 1, d, store.value(id).data())?;
            }
        }
    }

    let scorer = &model.scorer;
    write_block(
        &mut out,
        path,
        "scorer_w1",
        scorer.hidden,
        d,
        store.value(scorer.w1).data(),
    )?;
    write_block(&mut out, path, "scorer_b1", 1, scorer.hidden, store.value(scorer.b1).data())?;
    write_block(&mut out, path, "scorer_u", 1, scorer.hidden, store.value(scorer.u).data())?;
    write_block(&mut out, path, "scorer_b2", 1, 1, store.value(scorer.b2).data())?;
    write_block(&mut out, path, "beta", 1, 1, store.value(model.beta).data())?;
    write_block(&mut out, path, "cos_w", 1, 1, store.value(model.cos_head.w).data())?;
    write_block(&mut out, path, "cos_b", 1, 1, store.value(model.cos_head.b).data())?;

    let task = &model.task;
    let task_row = [
        match task.cost {
            CostKind::Cosine => 0.0,
            CostKind::L2 => 1.0,
        },
        match task.mode {
            DisambiguationMode::Ambiguous => 0.0,
            DisambiguationMode::Prior => 1.0,
            DisambiguationMode::Hard => 2.0,
            DisambiguationMode::Soft => 3.0,
        },
        if task.pooling { 1.0 } else { 0.0 },
        task.l2_margin,
        task.l2_calibration,
    ];
    write_block(&mut out, path, "task_config", 1, 5, &task_row)?;
    if let Some(c1) = &task.c1 {
        let mut row = c1.weights.clone();
        row.push(c1.bias);
        let len = row.len();
        write_block(&mut out, path, "c1", 1, len, &row)?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn expect_block(blocks: &mut std::vec::IntoIter<Block>, name: &str) -> Result<Block> {
    match blocks.next() {
        Some(b) if b.name == name => Ok(b),
        Some(b) => Err(Error::Format(format!(
            "expected block {name}, found {}",
            b.name
        ))),
        None => Err(Error::Format(format!("missing block {name}"))),
    }
}

/// Read a model from `path`.
pub fn load_model(path: &Path) -> Result<Model> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    let mut magic = String::new();
    reader.read_line(&mut magic).map_err(|e| Error::io(path, e))?;
    if magic.trim_end() != MAGIC {
        return Err(Error::Version(magic.trim_end().to_string()));
    }
    let mut header = String::new();
    reader.read_line(&mut header).map_err(|e| Error::io(path, e))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 8
        || parts[0] != "dim"
        || parts[2] != "senses"
        || parts[4] != "encoder"
        || parts[6] != "vocab"
    {
        return Err(Error::Format(format!("bad header: {}", header.trim_end())));
    }
    let dim: usize = parts[1].parse().map_err(|_| Error::Format("bad dim".into()))?;
    let n_senses: usize = parts[3].parse().map_err(|_| Error::Format("bad senses".into()))?;
    let kind = EncoderKind::parse(parts[5]).map_err(|_| Error::Format("bad encoder".into()))?;
    let v: usize = parts[7].parse().map_err(|_| Error::Format("bad vocab size".into()))?;
    if dim == 0 || n_senses == 0 || v == 0 {
        return Err(Error::Format("degenerate header".into()));
    }

    let mut entries = Vec::with_capacity(v);
    for i in 0..v {
        let mut line = String::new();
        let got = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if got == 0 {
            return Err(Error::Format(format!("vocabulary truncated at entry {i}")));
        }
        let line = line.trim_end_matches(['\n', '\r']);
        let (token, count) = line.split_once('\t').ok_or_else(|| {
            Error::Format(format!("bad vocabulary line {i}: {line}"))
        })?;
        let count: u64 = count
            .parse()
            .map_err(|_| Error::Format(format!("bad count for token {token}")))?;
        entries.push((token.to_string(), count));
    }
    let vocab = Vocabulary::from_entries(entries)?;

    let mut blocks = Vec::new();
    while let Some(b) = read_block(&mut reader, path)? {
        blocks.push(b);
    }
    let mut blocks = blocks.into_iter();

    let check_shape = |b: &Block, rows: usize, cols: usize| -> Result<()> {
        if b.rows != rows || b.cols != cols {
            return Err(Error::Format(format!(
                "block {} has shape {}x{}, expected {rows}x{cols}",
                b.name, b.rows, b.cols
            )));
        }
        Ok(())
    };

    let main_b = expect_block(&mut blocks, "main")?;
    check_shape(&main_b, v, dim)?;
    let centroids_b = expect_block(&mut blocks, "centroids")?;
    check_shape(&centroids_b, v * n_senses, dim)?;
    let senses_b = expect_block(&mut blocks, "senses")?;
    check_shape(&senses_b, v * n_senses, dim)?;
    let counts_b = expect_block(&mut blocks, "centroid_counts")?;
    check_shape(&counts_b, v, n_senses)?;

    // Rebuild the store in canonical allocation order.
    let mut store = ParamStore::new();
    let row = |data: &[f64], r: usize| -> Tensor {
        Tensor::from_parts(vec![dim], data[r * dim..(r + 1) * dim].to_vec())
    };
    let mut model_entries = Vec::with_capacity(v);
    for w in 0..v {
        let main = store.add(format!("main/{w}"), row(&main_b.data, w));
        let mut centroids = Vec::with_capacity(n_senses);
        for k in 0..n_senses {
            centroids.push(store.add(
                format!("centroid/{w}/{k}"),
                row(&centroids_b.data, w * n_senses + k),
            ));
        }
        let senses = if n_senses == 1 {
            vec![main]
        } else {
            (0..n_senses)
                .map(|k| {
                    store.add(
                        format!("sense/{w}/{k}"),
                        row(&senses_b.data, w * n_senses + k),
                    )
                })
                .collect()
        };
        let centroid_counts = (0..n_senses)
            .map(|k| counts_b.data[w * n_senses + k] as u64)
            .collect();
        model_entries.push(MultiSenseEntry {
            main,
            centroids,
            senses,
            centroid_counts,
        });
    }

    let encoder = match kind {
        EncoderKind::RecNn => {
            let wb = expect_block(&mut blocks, "comp_w")?;
            check_shape(&wb, dim, 2 * dim)?;
            let bb = expect_block(&mut blocks, "comp_b")?;
            check_shape(&bb, 1, dim)?;
            let w = store.add("comp_w", Tensor::from_parts(vec![dim, 2 * dim], wb.data));
            let b = store.add("comp_b", Tensor::from_parts(vec![dim], bb.data));
            Encoder::RecNn(CompositionLayer { w, b, dim })
        }
        EncoderKind::Rnn => {
            let mut mats = Vec::new();
            for name in ["lstm_wi", "lstm_wf", "lstm_wo", "lstm_wc"] {
                let b = expect_block(&mut blocks, name)?;
                check_shape(&b, dim, 2 * dim)?;
                mats.push(store.add(name, Tensor::from_parts(vec![dim, 2 * dim], b.data)));
            }
            let mut biases = Vec::new();
            for name in ["lstm_bi", "lstm_bf", "lstm_bo", "lstm_bc"] {
                let b = expect_block(&mut blocks, name)?;
                check_shape(&b, 1, dim)?;
                biases.push(store.add(name, Tensor::from_parts(vec![dim], b.data)));
            }
            Encoder::Rnn(LstmCell {
                w_i: mats[0],
                w_f: mats[1],
                w_o: mats[2],
                w_c: mats[3],
                b_i: biases[0],
                b_f: biases[1],
                b_o: biases[2],
                b_c: biases[3],
                dim,
            })
        }
    };

    let w1b = expect_block(&mut blocks, "scorer_w1")?;
    if w1b.cols != dim || w1b.rows == 0 {
        return Err(Error::Format(format!(
            "scorer_w1 has shape {}x{}, expected _x{dim}",
            w1b.rows, w1b.cols
        )));
    }
    let hidden = w1b.rows;
    let b1b = expect_block(&mut blocks, "scorer_b1")?;
    check_shape(&b1b, 1, hidden)?;
    let ub = expect_block(&mut blocks, "scorer_u")?;
    check_shape(&ub, 1, hidden)?;
    let b2b = expect_block(&mut blocks, "scorer_b2")?;
    check_shape(&b2b, 1, 1)?;
    let scorer = PlausibilityScorer {
        w1: store.add("scorer_w1", Tensor::from_parts(vec![hidden, dim], w1b.data)),
        b1: store.add("scorer_b1", Tensor::from_parts(vec![hidden], b1b.data)),
        u: store.add("scorer_u", Tensor::from_parts(vec![hidden], ub.data)),
        b2: store.add("scorer_b2", Tensor::from_parts(vec![1], b2b.data)),
        hidden,
        dim,
    };

    let beta_b = expect_block(&mut blocks, "beta")?;
    check_shape(&beta_b, 1, 1)?;
    let beta = store.add("beta", Tensor::from_parts(vec![1], beta_b.data));
    let cw = expect_block(&mut blocks, "cos_w")?;
    check_shape(&cw, 1, 1)?;
    let cb = expect_block(&mut blocks, "cos_b")?;
    check_shape(&cb, 1, 1)?;
    let cos_head = CosineCostParams {
        w: store.add("cos_w", Tensor::from_parts(vec![1], cw.data)),
        b: store.add("cos_b", Tensor::from_parts(vec![1], cb.data)),
    };

    let tc = expect_block(&mut blocks, "task_config")?;
    check_shape(&tc, 1, 5)?;
    let cost = match tc.data[0] as i64 {
        0 => CostKind::Cosine,
        1 => CostKind::L2,
        other => return Err(Error::Format(format!("bad cost tag {other}"))),
    };
    let mode = match tc.data[1] as i64 {
        0 => DisambiguationMode::Ambiguous,
        1 => DisambiguationMode::Prior,
        2 => DisambiguationMode::Hard,
        3 => DisambiguationMode::Soft,
        other => return Err(Error::Format(format!("bad mode tag {other}"))),
    };
    let mut task = TaskState {
        cost,
        mode,
        pooling: tc.data[2] != 0.0,
        l2_margin: tc.data[3],
        l2_calibration: tc.data[4],
        c1: None,
    };
    if let Some(b) = blocks.next() {
        if b.name != "c1" || b.rows != 1 || b.cols < 2 {
            return Err(Error::Format(format!("unexpected trailing block {}", b.name)));
        }
        let bias = *b.data.last().unwrap();
        task.c1 = Some(LogisticClassifier {
            weights: b.data[..b.cols - 1].to_vec(),
            bias,
        });
    }
    if let Some(b) = blocks.next() {
        return Err(Error::Format(format!("unexpected trailing block {}", b.name)));
    }

    Ok(Model {
        dim,
        n_senses,
        vocab,
        store,
        entries: model_entries,
        encoder,
        scorer,
        beta,
        cos_head,
        task,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::UNK_TOKEN;

    fn vocab() -> Vocabulary {
        Vocabulary::from_entries(vec![
            (UNK_TOKEN.into(), 2),
            ("alpha".into(), 5),
            ("beta".into(), 3),
        ])
        .unwrap()
    }

    #[test]
    fn roundtrip_preserves_values_at_storage_precision() {
        for kind in [EncoderKind::RecNn, EncoderKind::Rnn] {
            for n in [1usize, 3] {
                let mut model = Model::init(vocab(), 5, n, 4, kind, 123);
                model.entries[1].centroid_counts[0] = 7;
                model.task.c1 = Some(LogisticClassifier {
                    weights: vec![0.25, -0.5, 0.125, 1.0, 2.0],
                    bias: -0.75,
                });
                let dir = tempfile::tempdir().unwrap();
                let p1 = dir.path().join("m1.ckpt");
                save_model(&model, &p1).unwrap();
                let loaded = load_model(&p1).unwrap();

                assert_eq!(loaded.dim, model.dim);
                assert_eq!(loaded.n_senses, model.n_senses);
                assert_eq!(loaded.vocab.size(), model.vocab.size());
                assert_eq!(loaded.entries[1].centroid_counts[0], 7);
                assert_eq!(loaded.store.len(), model.store.len());
                for (a, b) in model.store.slots().iter().zip(loaded.store.slots()) {
                    for (x, y) in a.value.data().iter().zip(b.value.data()) {
                        assert_eq!(*x as f32, *y as f32, "slot {}", a.name);
                        assert_eq!(*y, f64::from(*y as f32), "loaded value must be f32-exact");
                    }
                }

                // Second save is byte-identical (32-bit values are fixed
                // points of the round trip).
                let p2 = dir.path().join("m2.ckpt");
                save_model(&loaded, &p2).unwrap();
                let b1 = std::fs::read(&p1).unwrap();
                let b2 = std::fs::read(&p2).unwrap();
                assert_eq!(b1, b2);
            }
        }
    }

    #[test]
    fn single_sense_roundtrip_keeps_alias() {
        let model = Model::init(vocab(), 4, 1, 3, EncoderKind::Rnn, 9);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        save_model(&model, &p).unwrap();
        let loaded = load_model(&p).unwrap();
        for e in &loaded.entries {
            assert_eq!(e.main, e.senses[0]);
        }
    }

    #[test]
    fn corrupted_magic_is_a_version_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.ckpt");
        std::fs::write(&p, b"SAMS v9\ndim 2 senses 1 encoder rnn vocab 1\n").unwrap();
        assert!(matches!(load_model(&p), Err(Error::Version(_))));
    }

    #[test]
    fn truncated_block_names_the_block() {
        let model = Model::init(vocab(), 4, 2, 3, EncoderKind::RecNn, 5);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        save_model(&model, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        // Cut a few bytes into the `main` block's payload.
        let header = b"block main";
        let start = bytes
            .windows(header.len())
            .position(|w| w == header)
            .unwrap();
        let line_end = start + bytes[start..].iter().position(|&b| b == b'\n').unwrap();
        std::fs::write(&p, &bytes[..line_end + 5]).unwrap();
        match load_model(&p) {
            Err(Error::Format(msg)) => {
                assert!(msg.contains("truncated") && msg.contains("main"), "got: {msg}")
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
