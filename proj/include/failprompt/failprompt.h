#ifndef FAILPROMPT_H
#define FAILPROMPT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FP_API __declspec(dllexport)
#else
#define FP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes 1..21 mirror the library error codes. */
typedef enum fp_status {
  FP_OK = 0,
  FP_ERR_ZERO_VECTOR = 1,
  FP_ERR_DIMENSION_MISMATCH,
  FP_ERR_BAD_INDEX,
  FP_ERR_NON_POSITIVE_TEMPERATURE,
  FP_ERR_NON_FINITE_VALUE,
  FP_ERR_SHAPE_MISMATCH,
  FP_ERR_UNKNOWN_TASK,
  FP_ERR_BAD_CLUSTER_INDEX,
  FP_ERR_EMPTY_POSITIVE_SET,
  FP_ERR_MISSING_FAILURE_TEXTS,
  FP_ERR_TOO_FEW_SAMPLES,
  FP_ERR_SIZE_MISMATCH,
  FP_ERR_BAD_CONFIG,
  FP_ERR_ARCHETYPE_UNSUPPORTED,
  FP_ERR_CORRUPT_FILE,
  FP_ERR_VERSION_MISMATCH,
  FP_ERR_BAD_HORIZON,
  FP_ERR_INSUFFICIENT_DATA,
  FP_ERR_INSUFFICIENT_STRATUM,
  FP_ERR_ONE_CLASS_ONLY,
  FP_ERR_IO,
  FP_ERR_INVALID_ARGUMENT = 100,
  FP_ERR_INTERNAL = 101
} fp_status;

typedef struct fp_config fp_config;
typedef struct fp_dataset fp_dataset;
typedef struct fp_model fp_model;
typedef struct fp_dynamics fp_dynamics;

FP_API const char* fp_version(void);
FP_API const char* fp_status_string(fp_status status);
/* Message of the last failed call on this thread; "" after a success. */
FP_API const char* fp_last_error(void);
/* Strings returned through char** out-parameters are owned by the caller. */
FP_API void fp_string_free(char* s);

/* Config: "key = value" text, unknown keys rejected. */
FP_API fp_status fp_config_new(fp_config** out);
FP_API fp_status fp_config_parse(const char* text, fp_config** out);
FP_API fp_status fp_config_load(const char* path, fp_config** out);
FP_API fp_status fp_config_set(fp_config* config, const char* key, const char* value);
FP_API fp_status fp_config_format(const fp_config* config, char** out);
/* Applies the seed precedence flag > REWARD_SEED > config; pass has_flag = 0 without a flag. */
FP_API fp_status fp_config_resolve_seed(fp_config* config, int has_flag, uint64_t flag_seed, uint64_t* resolved);
FP_API void fp_config_free(fp_config* config);

/* Datasets. tasks and sources are comma lists; NULL tasks means all seven. */
FP_API fp_status fp_dataset_generate(const char* tasks, int human_per_task, int robot_success_per_task,
                                     int robot_failure_per_task, const char* sources, double noise, uint64_t seed,
                                     fp_dataset** out);
/* Training (eval = 0) or evaluation (eval = 1) clips described by a config. */
FP_API fp_status fp_dataset_from_config(const fp_config* config, int eval, fp_dataset** out);
FP_API fp_status fp_dataset_load(const char* path, fp_dataset** out);
FP_API fp_status fp_dataset_save(const fp_dataset* dataset, const char* path);
FP_API size_t fp_dataset_size(const fp_dataset* dataset);
FP_API void fp_dataset_free(fp_dataset* dataset);

/* Training. metrics_log (optional) receives one JSON record per epoch. */
FP_API fp_status fp_train(const fp_config* config, const fp_dataset* dataset, fp_model** out, char** metrics_log);
FP_API fp_status fp_model_load(const char* path, fp_model** out);
FP_API fp_status fp_model_save(const fp_model* model, const char* path);
FP_API void fp_model_free(fp_model* model);

/* Success/failure separation as a JSON object (auc, pooled_auc, task_auc). */
FP_API fp_status fp_eval_separation(const fp_model* model, const fp_dataset* eval_set, const char* tasks,
                                    char** json);

/* Dynamics. */
FP_API fp_status fp_dynamics_ground_truth(fp_dynamics** out);
/* report (optional) receives a JSON object with the fit and held-out errors. */
FP_API fp_status fp_dynamics_train(int episodes, int epochs, uint64_t seed, fp_dynamics** out, char** report);
FP_API fp_status fp_dynamics_load(const char* path, fp_dynamics** out);
FP_API fp_status fp_dynamics_save(const fp_dynamics* dynamics, const char* path);
FP_API void fp_dynamics_free(fp_dynamics* dynamics);

typedef struct fp_plan_options {
  const char* reward; /* learned | oracle | random */
  int candidates;     /* G */
  int trials;
  int seeds;
  uint64_t seed;
  int refine_with_cem;
  const char* env_variant; /* NULL for the training environment */
} fp_plan_options;

FP_API void fp_plan_options_default(fp_plan_options* options);

/* Success rates per task as JSON lines. model may be NULL unless reward is learned. */
FP_API fp_status fp_eval_planning(const fp_model* model, const fp_dynamics* dynamics, const char* tasks,
                                  const fp_plan_options* options, char** json_lines);

/* One planned episode, executed in the simulator, as a trajectory dump. */
FP_API fp_status fp_plan_episode(const fp_model* model, const fp_dynamics* dynamics, const char* task,
                                 const char* reward, int candidates, uint64_t seed, char** trajectory,
                                 double* score, int* success);

/* Rollout of random actions (actions == NULL) or of a trajectory dump's actions. */
FP_API fp_status fp_sim_rollout(const char* task, uint64_t seed, int horizon, const char* actions_dump,
                                char** trajectory);

/* Ablation grid. cells == NULL runs the default grid; otherwise lines "mode,K,source". */
FP_API fp_status fp_ablate(const fp_config* base, const uint64_t* seeds, size_t seed_count, const char* cells,
                           int with_planning, char** csv);

/* Finite-difference checks as JSON lines: {"function": ..., "max_error": ...}. */
FP_API fp_status fp_grad_check(int batches, double eps, uint64_t first_seed, char** json_lines);

#ifdef __cplusplus
}
#endif

#endif
