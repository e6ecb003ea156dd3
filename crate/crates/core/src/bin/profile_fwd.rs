use mislstm_core::*;
use std::time::Instant;
fn main() {
    let (dataset, train_ids, _val, _) = preprocess::load_cache(std::path::Path::new("/tmp/bench/cache")).unwrap();
    let model = model::DayModel::<f32>::new(
        model::ModelKind::MisLstm,
        model::ModelConfig { n_subjects: 10, ..Default::default() },
        types::BlockConfig::default(),
        encoders::ContinuousEncoderConfig::default(),
        encoders::DiscreteEncoderConfig::default(),
        1,
    ).unwrap();
    let day = &dataset.days[train_ids[0]];

    // phase 1: block building (segmentation + rasterization + stacking)
    let t = Instant::now();
    for _ in 0..20 {
        let seq = imaging::build_block_sequence(&day.grid, &model.block_config).unwrap();
        let imgs = encoders::stack_images::<f32>(&seq.images);
        let disc = encoders::stack_discrete::<f32>(&seq.discrete_blocks);
        std::hint::black_box((imgs, disc));
    }
    println!("block build: {:.1} ms/day", t.elapsed().as_secs_f64() * 1000.0 / 20.0);

    // phase 2: forward only
    let t = Instant::now();
    for _ in 0..20 {
        let logits = model.infer_day(&day.grid, day.subject_idx).unwrap();
        std::hint::black_box(logits);
    }
    println!("forward: {:.1} ms/day", t.elapsed().as_secs_f64() * 1000.0 / 20.0);

    // phase 3: forward + backward
    let t = Instant::now();
    for _ in 0..20 {
        let mut tape = autograd::Tape::<f32>::new();
        let vars = model.store.bind_all(&mut tape);
        let out = model.forward_day(&mut tape, &vars, &day.grid, day.subject_idx, None).unwrap();
        let terms: Vec<_> = out.heads.iter().enumerate().map(|(h, &s)| {
            let flat = tape.reshape(s, &[types::HEAD_CLASSES[h]]);
            tape.focal_loss(flat, 0, 2.0, 1.0)
        }).collect();
        let loss = tape.add_scalars(&terms);
        let grads = tape.backward(loss);
        std::hint::black_box(grads);
    }
    println!("fwd+bwd: {:.1} ms/day", t.elapsed().as_secs_f64() * 1000.0 / 20.0);
}
