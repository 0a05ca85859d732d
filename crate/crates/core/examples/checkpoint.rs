//! Saves a network to the binary checkpoint format and restores it.

use fjsim::channel::stream_rng;
use fjsim::neuralnet::{load_checkpoint, save_checkpoint, LayerSpec, Network};
use ndarray::Array2;

fn main() -> fjsim::Result<()> {
    let specs = [
        LayerSpec::Dense { input: 4, output: 16 },
        LayerSpec::Relu,
        LayerSpec::BatchNorm { dim: 16 },
        LayerSpec::Dense { input: 16, output: 3 },
        LayerSpec::Softmax,
    ];
    let net = Network::new(&specs, &mut stream_rng(5, 0))?;
    let dir = std::env::temp_dir().join("fjsim-checkpoint-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("net.fjnn");
    save_checkpoint(&net, &path, 5)?;
    let (back, meta) = load_checkpoint(&path)?;
    let x = Array2::from_shape_fn((2, 4), |(i, j)| (i + j) as f64 * 0.1);
    println!("identical outputs: {}", net.predict(&x)? == back.predict(&x)?);
    if let Some(m) = meta {
        println!("format v{}, {} parameters, seed {}", m.format_version, m.param_count, m.seed);
    }
    println!("written to {}", path.display());
    Ok(())
}
