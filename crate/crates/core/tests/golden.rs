mod common;

use common::*;

#[test]
fn sta2nar_goldens() {
    for case in cases().sta2nar {
        let got = render_sta2nar_case(&case);
        let want = golden(&case.golden);
        assert!(got == want, "{}: first difference {:?}", case.name, first_diff(&got, &want));
    }
}

#[test]
fn utt2cmd_goldens() {
    for case in cases().utt2cmd {
        let got = render_utt2cmd_case(&case);
        let want = golden(&case.golden);
        assert!(got == want, "{}: first difference {:?}", case.name, first_diff(&got, &want));
    }
}

#[test]
fn gold_commands_execute() {
    let engine = fireball_core::engine::Engine::default();
    for case in cases().utt2cmd {
        let mut state = fireball_core::fixtures::combat(&case.combat).unwrap();
        engine.execute_line(&mut state, &case.gold, Some(&case.caster)).unwrap();
    }
}
