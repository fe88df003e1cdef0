use khop_core::{
    generate, make_nice, parse_decomposition, parse_instance, solve_treewidth, solve_with, verify, Algorithm, GenKind,
    GenParams, SolutionFile, SolveOptions,
};

#[test]
fn generated_files_solve_and_verify() {
    for (kind, algos) in [
        (GenKind::Path, &[Algorithm::Path, Algorithm::Tree, Algorithm::Treewidth, Algorithm::Oracle][..]),
        (GenKind::Tree, &[Algorithm::Tree, Algorithm::Treewidth, Algorithm::Oracle][..]),
        (GenKind::RandomConnected, &[Algorithm::Treewidth, Algorithm::Oracle][..]),
        (GenKind::PartialKTree(2), &[Algorithm::Treewidth, Algorithm::Oracle][..]),
    ] {
        for seed in 0..4 {
            let g = generate(&GenParams::new(kind, 7, seed));
            let file = parse_instance(&g.instance_text()).unwrap();
            let mut costs = Vec::new();
            for &algo in algos {
                let sol =
                    solve_with(&file.instance, algo, &SolveOptions { force: true, ..SolveOptions::default() }).unwrap();
                let json = SolutionFile::from_solution(&sol).to_json();
                let back = SolutionFile::from_json(&json).unwrap();
                assert_eq!(back, SolutionFile::from_solution(&sol));
                assert!(verify(&back, &file.instance, None).is_valid(), "{kind} {algo}");
                costs.push(sol.cost);
            }
            assert!(costs.windows(2).all(|w| w[0] == w[1]), "{kind} seed {seed}: {costs:?}");

            if let Some(text) = g.decomposition_text() {
                let td = parse_decomposition(&text, 7).unwrap();
                let nice = make_nice(&td, &file.graph, file.instance.root()).unwrap();
                assert_eq!(solve_treewidth(&file.instance, &nice).unwrap().cost, costs[0]);
            }
        }
    }
}
