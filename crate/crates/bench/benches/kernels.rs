//! Hot-path benchmarks: environment stepping, wave evaluation, network
//! forward/backward at training shapes, and a full agent update.

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use wavegrasp_core::nn::Mlp;
use wavegrasp_core::{
    ActionCommand, ActionMode, EnvConfig, GraspEnv, ReplayBuffer, SacAgent, SacConfig,
    SeaStateSpec, ACTION_DIM, STACKED_OBS_DIM,
};

fn bench_env_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("env_step");
    for code in [0u8, 2u8] {
        let mut env =
            GraspEnv::new(EnvConfig::default(), SeaStateSpec::preset(code).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seed = 0u64;
        env.reset(seed);
        group.bench_function(format!("sea_state_{code}"), |b| {
            b.iter(|| {
                let action = ActionCommand::random(&mut rng);
                match env.step(black_box(action)) {
                    Ok(r) if r.terminated || r.truncated => {
                        seed += 1;
                        env.reset(seed);
                    }
                    Ok(_) => {}
                    Err(_) => {
                        seed += 1;
                        env.reset(seed);
                    }
                }
            })
        });
    }
    group.finish();
}

fn bench_wave_offset(c: &mut Criterion) {
    let sea = SeaStateSpec::preset(2).unwrap();
    let mut t = 0.0;
    c.bench_function("wave_offset", |b| {
        b.iter(|| {
            t += 0.1;
            black_box(sea.offset(black_box(t)))
        })
    });
}

fn bench_mlp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let critic = Mlp::new(&[35, 256, 256, 256, 1], &mut rng);
    let batch = Array2::from_shape_fn((256, 35), |_| 0.1);
    c.bench_function("critic_forward_batch256", |b| {
        b.iter(|| black_box(critic.forward_batch(black_box(&batch))))
    });
    let trace = critic.forward_trace(&batch);
    let upstream = Array2::ones((256, 1));
    c.bench_function("critic_backward_batch256", |b| {
        b.iter(|| black_box(critic.backward(black_box(&trace), black_box(&upstream))))
    });
    let actor = Mlp::new(&[30, 256, 256, 10], &mut rng);
    let obs = vec![0.2; 30];
    c.bench_function("actor_forward_single", |b| {
        b.iter(|| black_box(actor.forward(black_box(&obs))))
    });
}

fn bench_sac_update(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = SacConfig::default();
    let mut agent = SacAgent::new(cfg.clone(), &mut rng).unwrap();
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, STACKED_OBS_DIM, ACTION_DIM);
    let mut env = GraspEnv::new(EnvConfig::default(), SeaStateSpec::preset(0).unwrap()).unwrap();
    let mut obs = env.reset(0);
    for k in 0..1500u64 {
        let action = ActionCommand::random(&mut rng);
        match env.step(action) {
            Ok(r) => {
                buffer.push_transition(&obs, &action, r.reward, &r.observation, r.terminated);
                obs = r.observation;
                if r.terminated || r.truncated {
                    obs = env.reset(k);
                }
            }
            Err(_) => obs = env.reset(k),
        }
    }
    c.bench_function("sac_update_batch256", |b| {
        b.iter(|| black_box(agent.update(&buffer, cfg.batch_size, &mut rng).unwrap()))
    });

    let stacked = obs.clone();
    c.bench_function("select_action_stochastic", |b| {
        b.iter(|| {
            black_box(
                agent
                    .select_action(black_box(&stacked), ActionMode::Stochastic, &mut rng)
                    .unwrap(),
            )
        })
    });
}

criterion_group!(
    benches,
    bench_env_step,
    bench_wave_offset,
    bench_mlp,
    bench_sac_update
);
criterion_main!(benches);
