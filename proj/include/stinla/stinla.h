/* C interface to the stinla library. Every function that can fail returns a
 * stinla_status; the message of the most recent failure on the calling thread
 * is available from stinla_last_error(). Dates are "YYYY-MM-DD" strings. */
#ifndef STINLA_STINLA_H
#define STINLA_STINLA_H

#include <stddef.h>
#include <stdint.h>

#if defined(STINLA_BUILDING_LIBRARY)
#define STINLA_API __attribute__((visibility("default")))
#else
#define STINLA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum stinla_status {
  STINLA_OK = 0,
  STINLA_INVALID_INPUT = 1,
  STINLA_INVALID_SPEC = 2,
  STINLA_PARSE = 3,
  STINLA_IO = 4,
  STINLA_DUPLICATE_ROW = 5,
  STINLA_NOT_POSITIVE_DEFINITE = 6,
  STINLA_NO_CONVERGENCE = 7,
  STINLA_DEGENERATE_PROBLEM = 8,
  STINLA_UNSUPPORTED_SIZE = 9,
  STINLA_EMPTY_METRIC = 10,
  STINLA_NO_INTERIOR_MODE = 11,
  STINLA_NOT_A_MAXIMUM = 12,
  STINLA_INTERNAL = 99
} stinla_status;

typedef struct stinla_graph stinla_graph;
typedef struct stinla_frame stinla_frame;
typedef struct stinla_config stinla_config;
typedef struct stinla_fit stinla_fit;

STINLA_API const char* stinla_version(void);
STINLA_API const char* stinla_last_error(void);
STINLA_API const char* stinla_status_name(stinla_status status);
/* Nonzero for failures of the numerical core rather than of the input. */
STINLA_API int stinla_status_is_numerical(stinla_status status);

/* Site graphs (edge-list files). */
STINLA_API stinla_status stinla_graph_read(const char* path, stinla_graph** out);
STINLA_API stinla_status stinla_graph_sample(int n_sites, uint64_t seed, stinla_graph** out);
STINLA_API stinla_status stinla_graph_write(const stinla_graph* graph, const char* path);
STINLA_API stinla_status stinla_graph_write_grid(const stinla_graph* graph, const char* path);
STINLA_API int stinla_graph_num_sites(const stinla_graph* graph);
STINLA_API size_t stinla_graph_num_edges(const stinla_graph* graph);
STINLA_API void stinla_graph_free(stinla_graph* graph);

/* Count frames. */
STINLA_API stinla_status stinla_frame_read(const char* path, stinla_frame** out);
/* Sums the kept detectors of a raw export into half-hour site counts. */
STINLA_API stinla_status stinla_frame_clean(const char* raw_path, const char* keep_path,
                                            stinla_frame** out);
/* Hour bins over [first_hour, end_hour); *dropped receives the number of
 * incomplete half-hour pairs left out (may be NULL). */
STINLA_API stinla_status stinla_frame_aggregate_hourly(const stinla_frame* frame, int first_hour,
                                                       int end_hour, stinla_frame** out,
                                                       size_t* dropped);
/* part is "all", "weekday" or "weekend". */
STINLA_API stinla_status stinla_frame_select_weekpart(const stinla_frame* frame, const char* part,
                                                      stinla_frame** out);
STINLA_API stinla_status stinla_frame_write(const stinla_frame* frame, const char* path);
STINLA_API stinla_status stinla_frame_write_id_map(const stinla_frame* frame, const char* path);
STINLA_API stinla_status stinla_frame_write_missingness(const stinla_frame* frame,
                                                        const char* by_week_path,
                                                        const char* by_site_path);
STINLA_API size_t stinla_frame_num_rows(const stinla_frame* frame);
STINLA_API size_t stinla_frame_num_missing(const stinla_frame* frame);
STINLA_API int stinla_frame_num_sites(const stinla_frame* frame);
/* Writes the first and last dates; each buffer needs 11 bytes. */
STINLA_API stinla_status stinla_frame_date_range(const stinla_frame* frame, char* first, char* last);
STINLA_API void stinla_frame_free(stinla_frame* frame);

/* Model configuration (flat key = value file). */
STINLA_API stinla_status stinla_config_new(stinla_config** out);
STINLA_API stinla_status stinla_config_read(const char* path, stinla_config** out);
STINLA_API stinla_status stinla_config_set(stinla_config* config, const char* key, const char* value);
STINLA_API stinla_status stinla_config_write(const stinla_config* config, const char* path);
STINLA_API void stinla_config_free(stinla_config* config);

/* Synthetic data. A NULL graph is replaced by a sampled one, returned in
 * *graph_out when that is non-NULL. truth_path may be NULL. */
typedef struct stinla_sim_options {
  int n_sites;
  int n_days;
  int period;
  int weekdays_only;
  const char* start_date;
  double intercept;
  double tau_spatial_structured;
  double tau_spatial_iid;
  double tau_seasonal;
  double tau_time_iid;
  double tau_interaction;
  double mask_rate;
  int zigzag_site;
  double zigzag_factor;
  int stuck_site; /* 0 = no stuck-low fault */
  int stuck_day;
  int stuck_bin;
  double stuck_factor;
  uint64_t seed;
} stinla_sim_options;

STINLA_API void stinla_sim_options_default(stinla_sim_options* options);
STINLA_API stinla_status stinla_simulate(const stinla_sim_options* options, const stinla_graph* graph,
                                         stinla_graph** graph_out, stinla_frame** frame_out,
                                         const char* truth_path);

/* Fits the model. When predict_from/predict_to are non-NULL the rows in that
 * date range are hidden from the fit and scored against. config may be NULL. */
STINLA_API stinla_status stinla_fit_model(const stinla_frame* frame, const stinla_graph* graph,
                                          const stinla_config* config, const char* predict_from,
                                          const char* predict_to, stinla_fit** out);
STINLA_API stinla_status stinla_fit_read(const char* path, stinla_fit** out);
STINLA_API stinla_status stinla_fit_write(const stinla_fit* fit, const char* path);
/* Masked cells only: Date,TimeBin,ID,Observed,Predicted,SD. */
STINLA_API stinla_status stinla_fit_write_predictions(const stinla_fit* fit, const char* path);
STINLA_API stinla_status stinla_fit_write_hyper(const stinla_fit* fit, const char* path);
STINLA_API stinla_status stinla_fit_write_latent(const stinla_fit* fit, const char* path);
STINLA_API size_t stinla_fit_num_hyper(const stinla_fit* fit);
STINLA_API stinla_status stinla_fit_hyper(const stinla_fit* fit, size_t index, const char** name,
                                          double* log_precision);
STINLA_API int stinla_fit_evaluations(const stinla_fit* fit);
STINLA_API double stinla_fit_log_evidence(const stinla_fit* fit);
STINLA_API stinla_status stinla_fit_predict(const stinla_fit* fit, const char* const* dates,
                                            const int* time_bins, const int* site_ids, size_t n,
                                            double* out);
/* Reads Date,TimeBin,ID keys and writes Date,TimeBin,ID,Predicted. */
STINLA_API stinla_status stinla_fit_predict_file(const stinla_fit* fit, const char* keys_path,
                                                 const char* out_path);
STINLA_API void stinla_fit_free(stinla_fit* fit);

/* Metrics. */
STINLA_API stinla_status stinla_mpe(const double* observed, const double* predicted, size_t n,
                                    double* out);
/* Overall MPE of the masked cells of a fit; writes mpe_summary.csv to out_dir
 * when that is non-NULL. */
STINLA_API stinla_status stinla_evaluate(const stinla_fit* fit, const char* out_dir, double* overall);
/* Grouped tables: mpe_summary.csv, mpe_by_site.csv, mpe_by_day.csv,
 * mpe_by_time.csv and mpe_by_day_time.csv. */
STINLA_API stinla_status stinla_report(const stinla_fit* fit, const char* out_dir);
/* Prior-mean baseline over [from, to] compared with the fit's predictions;
 * writes comparison.csv to out_path. Either average may be NULL. */
STINLA_API stinla_status stinla_baseline_compare(const stinla_frame* frame, const stinla_fit* fit,
                                                 const char* from, const char* to,
                                                 int history_weeks, const char* out_path,
                                                 double* mean_mpe, double* pred_mpe);

#ifdef __cplusplus
}
#endif

#endif
