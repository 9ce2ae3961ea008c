//! Drive the pipeline end to end through the C ABI.

use std::ffi::CStr;
use std::ptr;

use profweight_ffi::*;

fn sgd(epochs: usize, seed: u64) -> PwSgdConfig {
    PwSgdConfig {
        learning_rate: 0.1,
        batch_size: 32,
        epochs,
        l2_penalty: 1e-4,
        momentum: 0.9,
        seed,
    }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(pw_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn full_pipeline_through_the_c_abi() {
    unsafe {
        let mut data: *mut PwDataset = ptr::null_mut();
        assert_eq!(
            pw_dataset_synth_hard_regions(1200, 0.3, 42, &mut data),
            PwStatus::PwOk
        );
        assert_eq!(pw_dataset_len(data), 1200);
        assert_eq!(pw_dataset_dim(data), 2);

        let mut d_n: *mut PwDataset = ptr::null_mut();
        let mut d_s: *mut PwDataset = ptr::null_mut();
        let mut val: *mut PwDataset = ptr::null_mut();
        let mut holdout: *mut PwDataset = ptr::null_mut();
        assert_eq!(
            pw_dataset_split(
                data, 0.6, 0.2, 0.05, 0.15, 9, false, &mut d_n, &mut d_s, &mut val, &mut holdout,
            ),
            PwStatus::PwOk
        );
        assert_eq!(
            pw_dataset_len(d_n) + pw_dataset_len(d_s) + pw_dataset_len(val)
                + pw_dataset_len(holdout),
            1200
        );

        let widths = [12usize, 10];
        let mut model: *mut PwModel = ptr::null_mut();
        assert_eq!(
            pw_model_train(d_n, widths.as_ptr(), widths.len(), sgd(50, 3), &mut model),
            PwStatus::PwOk,
            "{}",
            last_error()
        );
        let mut complex_acc = 0.0;
        assert_eq!(
            pw_model_accuracy(model, holdout, &mut complex_acc),
            PwStatus::PwOk
        );
        assert!(complex_acc > 0.75, "complex accuracy {complex_acc}");

        let mut probes: *mut PwProbes = ptr::null_mut();
        assert_eq!(
            pw_probes_train(model, d_n, d_s, sgd(30, 5), true, &mut probes),
            PwStatus::PwOk,
            "{}",
            last_error()
        );
        assert_eq!(pw_probes_count(probes), 3);
        let mut errors = [0.0f64; 3];
        assert_eq!(
            pw_probes_errors(probes, errors.as_mut_ptr(), errors.len()),
            PwStatus::PwOk
        );
        assert!(errors.iter().all(|e| (0.0..=1.0).contains(e)));

        let spec = PwSimpleSpec {
            kind: PwSimpleKind::PwSimpleTree,
            tree_max_depth: 2,
            mlp_hidden: ptr::null(),
            mlp_hidden_len: 0,
            sgd: sgd(30, 7),
        };
        let mut weights: *mut PwWeights = ptr::null_mut();
        let mut student: *mut PwSimpleModel = ptr::null_mut();
        // A small negative margin keeps the selection non-empty even when
        // the student happens to edge out the probes on this small split.
        assert_eq!(
            pw_profweight_auc(model, probes, d_s, spec, -0.05, &mut weights, &mut student),
            PwStatus::PwOk,
            "{}",
            last_error()
        );
        assert_eq!(pw_weights_len(weights), pw_dataset_len(d_s));
        let mean = pw_weights_mean(weights);
        assert!(mean > 0.0 && mean <= 1.0, "mean weight {mean}");

        let mut copied = vec![0.0; pw_weights_len(weights)];
        assert_eq!(
            pw_weights_copy(weights, copied.as_mut_ptr(), copied.len()),
            PwStatus::PwOk
        );
        assert!(copied.iter().all(|w| (0.0..=1.0).contains(w)));

        let mut student_acc = 0.0;
        assert_eq!(
            pw_simple_accuracy(student, holdout, &mut student_acc),
            PwStatus::PwOk
        );
        assert!(student_acc > 0.6, "student accuracy {student_acc}");

        let mut class = usize::MAX;
        let x = [0.0f64, 0.0];
        assert_eq!(
            pw_simple_predict(student, x.as_ptr(), 2, &mut class),
            PwStatus::PwOk
        );
        assert!(class < 2);

        // Artifact round trips through temp files.
        let dir = std::env::temp_dir().join(format!("pw-ffi-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let model_path = std::ffi::CString::new(
            dir.join("model.json").to_str().unwrap().to_string(),
        )
        .unwrap();
        assert_eq!(pw_model_save_json(model, model_path.as_ptr()), PwStatus::PwOk);
        let mut model2: *mut PwModel = ptr::null_mut();
        assert_eq!(pw_model_load_json(model_path.as_ptr(), &mut model2), PwStatus::PwOk);
        let mut acc2 = 0.0;
        assert_eq!(pw_model_accuracy(model2, holdout, &mut acc2), PwStatus::PwOk);
        assert_eq!(acc2, complex_acc);

        let csv_path = std::ffi::CString::new(
            dir.join("weights.csv").to_str().unwrap().to_string(),
        )
        .unwrap();
        assert_eq!(pw_weights_save_csv(weights, csv_path.as_ptr()), PwStatus::PwOk);
        let mut weights2: *mut PwWeights = ptr::null_mut();
        assert_eq!(pw_weights_load_csv(csv_path.as_ptr(), &mut weights2), PwStatus::PwOk);
        let mut copied2 = vec![0.0; pw_weights_len(weights2)];
        assert_eq!(
            pw_weights_copy(weights2, copied2.as_mut_ptr(), copied2.len()),
            PwStatus::PwOk
        );
        assert_eq!(copied, copied2);

        pw_weights_free(weights);
        pw_weights_free(weights2);
        pw_simple_free(student);
        pw_probes_free(probes);
        pw_model_free(model);
        pw_model_free(model2);
        for d in [data, d_n, d_s, val, holdout] {
            pw_dataset_free(d);
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}

#[test]
fn error_paths_report_codes_and_messages() {
    unsafe {
        // Null arguments.
        assert_eq!(
            pw_dataset_synth_hard_regions(100, 0.1, 1, ptr::null_mut()),
            PwStatus::PwErrNullArgument
        );

        // Invalid noise rate.
        let mut data: *mut PwDataset = ptr::null_mut();
        assert_eq!(
            pw_dataset_synth_hard_regions(100, 0.9, 1, &mut data),
            PwStatus::PwErr
        );
        assert!(last_error().contains("noise rate"), "{}", last_error());

        // Empty probe set: a huge alpha excludes every probe.
        assert_eq!(
            pw_dataset_synth_hard_regions(400, 0.2, 2, &mut data),
            PwStatus::PwOk
        );
        let mut d_n: *mut PwDataset = ptr::null_mut();
        let mut d_s: *mut PwDataset = ptr::null_mut();
        let mut val: *mut PwDataset = ptr::null_mut();
        let mut holdout: *mut PwDataset = ptr::null_mut();
        assert_eq!(
            pw_dataset_split(
                data, 0.5, 0.3, 0.1, 0.1, 4, false, &mut d_n, &mut d_s, &mut val, &mut holdout,
            ),
            PwStatus::PwOk
        );
        let widths = [8usize];
        let mut model: *mut PwModel = ptr::null_mut();
        assert_eq!(
            pw_model_train(d_n, widths.as_ptr(), 1, sgd(20, 1), &mut model),
            PwStatus::PwOk
        );
        let mut probes: *mut PwProbes = ptr::null_mut();
        assert_eq!(
            pw_probes_train(model, d_n, d_s, sgd(10, 2), true, &mut probes),
            PwStatus::PwOk
        );
        let spec = PwSimpleSpec {
            kind: PwSimpleKind::PwSimpleLogistic,
            tree_max_depth: 0,
            mlp_hidden: ptr::null(),
            mlp_hidden_len: 0,
            sgd: sgd(15, 3),
        };
        let mut weights: *mut PwWeights = ptr::null_mut();
        let mut student: *mut PwSimpleModel = ptr::null_mut();
        assert_eq!(
            pw_profweight_auc(model, probes, d_s, spec, 5.0, &mut weights, &mut student),
            PwStatus::PwErrEmptyProbeSet
        );
        assert!(last_error().contains("lower alpha"), "{}", last_error());

        // Missing artifact maps to the data status.
        let missing = std::ffi::CString::new("/nonexistent/model.json").unwrap();
        let mut loaded: *mut PwModel = ptr::null_mut();
        assert_eq!(
            pw_model_load_json(missing.as_ptr(), &mut loaded),
            PwStatus::PwErrData
        );

        pw_probes_free(probes);
        pw_model_free(model);
        for d in [data, d_n, d_s, val, holdout] {
            pw_dataset_free(d);
        }
    }
}

#[test]
fn theory_functions_work_over_the_abi() {
    unsafe {
        let p = [0.3f64, 0.7];
        let q = [0.6f64, 0.4];
        let mut tv = 0.0;
        assert_eq!(pw_tv_distance(p.as_ptr(), q.as_ptr(), 2, &mut tv), PwStatus::PwOk);
        assert!((tv - 0.3).abs() < 1e-15);
        let mut bayes = 0.0;
        assert_eq!(
            pw_bayes_error_discrete(p.as_ptr(), q.as_ptr(), 2, &mut bayes),
            PwStatus::PwOk
        );
        assert!((bayes - (0.5 - 0.5 * tv)).abs() < 1e-15);
        let mut violations = usize::MAX;
        assert_eq!(
            pw_lemma_grid_verify(p.as_ptr(), q.as_ptr(), 2, 1000, &mut violations),
            PwStatus::PwOk
        );
        assert_eq!(violations, 0);

        // Non-interior distributions are rejected.
        let bad = [0.0f64, 1.0];
        assert_eq!(
            pw_tv_distance(bad.as_ptr(), q.as_ptr(), 2, &mut tv),
            PwStatus::PwErr
        );
    }
}
