use rodnet_core::config::RunConfig;

fn main() {
    let text = r#"{
        "version": 1,
        "rods": [
            {
                "length": 1.0,
                "frame": {"tangent": [1, 0, 1], "normal": [0, 1, 0]},
                "stiffness": {"matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]},
                "load": {"end_force": [0.5, 0, 0]}
            }
        ],
        "solver": {"segments": 32}
    }"#;
    let once = RunConfig::from_str(text).unwrap().normalized().unwrap();
    let json1 = once.to_json().unwrap();
    let twice = RunConfig::from_str(&json1).unwrap().normalized().unwrap();
    let json2 = twice.to_json().unwrap();
    for (a, b) in json1.lines().zip(json2.lines()) {
        if a != b {
            println!("1: {a}\n2: {b}");
        }
    }
    // the raw quaternion components
    if let rodnet_core::config::FrameConfig::Quaternion { quaternion } = &once.rods[0].frame {
        println!("pass1 bits: {:?}", quaternion.map(f64::to_bits));
    }
    if let rodnet_core::config::FrameConfig::Quaternion { quaternion } = &twice.rods[0].frame {
        println!("pass2 bits: {:?}", quaternion.map(f64::to_bits));
    }
}
