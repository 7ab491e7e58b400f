use trickleswap::adversary::{first_timestamp_estimate, observations, observations_from_lines};
use trickleswap::experiments::ScenarioConfig;
use trickleswap::simnet::{read_jsonl, run_simulation};
use trickleswap::SpreadingStrategy;

#[test]
fn dumped_trace_gives_the_same_estimate() {
    for run_id in 0..10 {
        let cfg = ScenarioConfig {
            strategy: SpreadingStrategy::trickle(150),
            eavesdroppers: 3,
            file_size: 600 * 1024,
            seed: 77,
            ..ScenarioConfig::default()
        };
        let topo = cfg.topology();
        let trace = run_simulation(
            &topo,
            &cfg.sim_config(run_id),
            &cfg.run_file(run_id),
            cfg.leech_id(),
        )
        .unwrap();

        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let lines = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(lines.len(), trace.events.len());

        let root = trace.root();
        let direct = observations(&trace);
        let parsed = observations_from_lines(&lines, &topo, &root);
        let direct_root: Vec<_> = direct.iter().filter(|o| o.cid == root).collect();
        assert_eq!(parsed.len(), direct_root.len());

        let tie = 1234;
        assert_eq!(
            first_timestamp_estimate(&direct, &root, tie),
            first_timestamp_estimate(&parsed, &root, tie),
        );
    }
}
