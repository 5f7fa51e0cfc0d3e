/* Leaf area estimation from RGBD frames: C interface.
 *
 * Every function returns an la3d_status. On failure a thread-local message is
 * available from la3d_last_error() until the next call on the same thread.
 * Objects are opaque handles released with their *_free function; strings and
 * buffers handed out by the library are released with la3d_string_free and
 * la3d_buffer_free. Areas are in cm^2, distances in meters.
 */
#ifndef LEAFAREA3D_H
#define LEAFAREA3D_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(LEAFAREA3D_BUILD)
#    define LA3D_API __declspec(dllexport)
#  else
#    define LA3D_API __declspec(dllimport)
#  endif
#else
#  define LA3D_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum la3d_status {
    LA3D_OK = 0,
    LA3D_ERR_INVALID_ARGUMENT = 1,
    LA3D_ERR_IO = 2,
    LA3D_ERR_FORMAT = 3,
    LA3D_ERR_DEGENERATE = 4,
    LA3D_ERR_NUMERIC = 5,
    LA3D_ERR_INTERNAL = 6
} la3d_status;

LA3D_API const char* la3d_version(void);
LA3D_API const char* la3d_status_name(la3d_status status);
LA3D_API const char* la3d_last_error(void);

LA3D_API void la3d_string_free(char* s);
LA3D_API void la3d_buffer_free(void* p);

/* ---- datasets ---------------------------------------------------------- */

typedef struct la3d_dataset la3d_dataset;

LA3D_API la3d_status la3d_dataset_load(const char* annotation_path, la3d_dataset** out);
LA3D_API void la3d_dataset_free(la3d_dataset* ds);
LA3D_API la3d_status la3d_dataset_counts(const la3d_dataset* ds, size_t* images, size_t* instances);

/* ---- depth rasters and filters ----------------------------------------- */

typedef struct la3d_depth la3d_depth;

LA3D_API la3d_status la3d_depth_create(int width, int height, const uint16_t* data, la3d_depth** out);
LA3D_API la3d_status la3d_depth_read_png(const char* path, la3d_depth** out);
LA3D_API la3d_status la3d_depth_write_png(const la3d_depth* depth, const char* path);
LA3D_API la3d_status la3d_depth_size(const la3d_depth* depth, int* width, int* height);
/* Row-major width * height raw values, valid while the handle lives. */
LA3D_API const uint16_t* la3d_depth_data(const la3d_depth* depth);
LA3D_API void la3d_depth_free(la3d_depth* depth);

/* Even diameters are rounded up to the next odd value. */
LA3D_API la3d_status la3d_bilateral_filter(const la3d_depth* in, int diameter, double sigma_color,
                                           double sigma_space, la3d_depth** out);
LA3D_API la3d_status la3d_median_filter(const la3d_depth* in, int kernel, la3d_depth** out);

/* ---- single-instance estimation ---------------------------------------- */

typedef struct la3d_mesh la3d_mesh;

/* config_json: flat object such as {"backend": "heightfield"}; NULL or ""
 * keeps the defaults. mesh_out may be NULL. */
LA3D_API la3d_status la3d_estimate_instance(const la3d_dataset* ds, int64_t instance_id,
                                            const char* config_json, double* area_cm2,
                                            double* distance_m, la3d_mesh** mesh_out);
LA3D_API la3d_status la3d_mesh_info(const la3d_mesh* mesh, size_t* vertices, size_t* triangles,
                                    double* area_m2);
/* Format chosen by extension: .ply or .obj */
LA3D_API la3d_status la3d_mesh_write(const la3d_mesh* mesh, const char* path);
LA3D_API void la3d_mesh_free(la3d_mesh* mesh);

/* ---- batch commands ---------------------------------------------------- */

/* Writes one CSV row per annotated instance; instance failures become rows
 * with an error message and are counted in n_errors. */
LA3D_API la3d_status la3d_run_estimate(const char* dataset_path, const char* config_json, int workers,
                                       const char* out_csv, size_t* n_rows, size_t* n_errors);

/* predictions: a results CSV or a JSON prediction file (by extension).
 * out_json / out_bins_csv / report_out may each be NULL. */
LA3D_API la3d_status la3d_run_eval(const char* predictions_path, const char* gt_dataset_path,
                                   double ioa_threshold, double min_confidence, const char* out_json,
                                   const char* out_bins_csv, char** report_out);

LA3D_API la3d_status la3d_run_crossval(const char* dataset_path, int k, uint64_t seed,
                                       const char* config_json, int workers, const char* out_json,
                                       const char* out_csv, char** summary_out);

/* synth_json: {"count", "distances", "min_area_cm2", "max_area_cm2",
 * "max_tilt_deg", "planar_only", "quant_step", "sp_prob", "noise_seed",
 * "seed"}; annotation_path_out may be NULL. */
LA3D_API la3d_status la3d_run_synth(const char* synth_json, const char* out_dir,
                                    char** annotation_path_out);

/* ---- area head --------------------------------------------------------- */

typedef struct la3d_area_head la3d_area_head;

LA3D_API la3d_status la3d_area_head_load(const char* weights_path, la3d_area_head** out);
LA3D_API la3d_status la3d_area_head_from_json(const char* weights_json, la3d_area_head** out);
/* widths: n_widths >= 2 layer widths C_0..C_n */
LA3D_API la3d_status la3d_area_head_random(const int* widths, size_t n_widths, uint64_t seed,
                                           la3d_area_head** out);
LA3D_API la3d_status la3d_area_head_to_json(const la3d_area_head* head, char** json_out);
LA3D_API void la3d_area_head_free(la3d_area_head* head);

/* features: channels * height * width values, channel-major; mask: height *
 * width values in [0, 1]. map_out (height * width) may be NULL. */
LA3D_API la3d_status la3d_area_head_forward(const la3d_area_head* head, const double* features,
                                            int channels, int height, int width, const double* mask,
                                            double* area_out, double* map_out);
LA3D_API la3d_status la3d_area_head_loss(const la3d_area_head* head, double pred, double gt,
                                         double* loss_out);
LA3D_API la3d_status la3d_area_head_grad_check(const la3d_area_head* head, const double* features,
                                               int channels, int height, int width,
                                               const double* mask, double gt, double step,
                                               double* max_rel_error, size_t* checked,
                                               size_t* excluded);

/* shape: "C,H,W" for raw float32 files, NULL for .npy. Free with la3d_buffer_free. */
LA3D_API la3d_status la3d_load_features(const char* path, const char* shape, double** data,
                                        int* channels, int* height, int* width);
/* 8-bit PNG (scaled by 1/255) or .npy of shape (H, W). */
LA3D_API la3d_status la3d_load_mask(const char* path, double** data, int* height, int* width);

#ifdef __cplusplus
}
#endif

#endif /* LEAFAREA3D_H */
