use ris_noma::channel::{path_gain, place_users, realize_channels, ChannelRealization};
use ris_noma::model::SystemConfig;

#[test]
fn smaller_systems_are_prefixes() {
    let big = SystemConfig { seed: 8, ris_elements: 48, bs_antennas: 4, ..SystemConfig::default() }.with_users(8);
    let small = SystemConfig { ris_elements: 16, bs_antennas: 2, ..big.clone() }.with_users(4);
    let (a, b) = (realize_channels(&big).unwrap(), realize_channels(&small).unwrap());
    assert_eq!(a.user_pos[..4], b.user_pos[..]);
    for i in 0..16 {
        for j in 0..2 {
            assert_eq!(a.bs_ris[(i, j)], b.bs_ris[(i, j)]);
        }
    }
    for k in 0..4 {
        assert_eq!(a.ris_user[k].rows(0, 16), b.ris_user[k]);
    }
}

#[test]
fn users_stay_in_the_region() {
    let cfg = SystemConfig::default().with_users(8);
    for p in place_users(&cfg, 3).unwrap() {
        assert!((90.0..=190.0).contains(&p.0[0]) && (-10.0..=10.0).contains(&p.0[1]) && p.0[2] == 0.0);
    }
}

#[test]
fn path_loss_tracks_distance() {
    let cfg = SystemConfig::default();
    let ch = realize_channels(&cfg).unwrap();
    let expected = path_gain(ch.bs_ris_distance, cfg.alpha_bs_ris, cfg.ref_gain).unwrap();
    let mean_power = ch.bs_ris.iter().map(|z| z.norm_sqr()).sum::<f64>() / ch.bs_ris.len() as f64;
    // Rician entries have unit mean power before path loss.
    assert!((mean_power / expected - 1.0).abs() < 0.5);
}

#[test]
fn dump_round_trips() {
    let ch = realize_channels(&SystemConfig { ris_elements: 3, ..SystemConfig::default() }).unwrap();
    let back = ChannelRealization::parse_dump(&ch.dump()).unwrap();
    assert_eq!(back.bs_ris, ch.bs_ris);
    assert_eq!(back.ris_user, ch.ris_user);
}
