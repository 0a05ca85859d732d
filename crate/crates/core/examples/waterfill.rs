//! Water-filling over the singular-value gains of a channel.

use fjsim::channel::{stream_rng, sample_channel};
use fjsim::conventional::{waterfill, waterfill_objective, SvdPrecoder};

fn main() -> fjsim::Result<()> {
    let h = sample_channel(4, 3, &mut stream_rng(3, 0));
    let pre = SvdPrecoder::new(&h)?;
    println!("gains: {:?}", pre.gains);
    for p in [0.1, 1.0, 10.0, 100.0] {
        let a = waterfill(&pre.gains, p)?;
        println!(
            "P {p:>6}: level {:.4}  powers {:?}  rate {:.4} nats",
            a.water_level,
            a.per_stream.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>(),
            waterfill_objective(&pre.gains, &a.per_stream)
        );
    }
    Ok(())
}
