#ifndef HDNET_H
#define HDNET_H

#include <stddef.h>
#include <stdint.h>

#if defined(HDNET_BUILDING_LIBRARY)
#define HDNET_API __attribute__((visibility("default")))
#else
#define HDNET_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hdnet_status {
  HDNET_OK = 0,
  HDNET_ERR_IO = 1,
  HDNET_ERR_CONFIG = 2,
  HDNET_ERR_DIMENSION = 3,
  HDNET_ERR_CONTRACT = 4,
  HDNET_ERR_VERSION = 5,
  HDNET_ERR_NUMERIC = 6,
  HDNET_ERR_GENERATION = 7,
  HDNET_ERR_SELFTEST = 8,
  HDNET_ERR_INVALID_ARGUMENT = 9,
  HDNET_ERR_INTERNAL = 10
} hdnet_status;

typedef struct hdnet_model hdnet_model;
typedef struct hdnet_image hdnet_image;
typedef struct hdnet_eval_report hdnet_eval_report;

typedef struct hdnet_metrics {
  double mse;
  double fmse;
  double psnr;
  double ssim;
  size_t n_images;
} hdnet_metrics;

/* Message of the last failed call on this thread; never NULL. */
HDNET_API const char* hdnet_last_error(void);
/* Config line of the last HDNET_ERR_CONFIG, or 0 when not tied to a line. */
HDNET_API int hdnet_last_error_line(void);
HDNET_API const char* hdnet_version(void);

/* Trains from a config file into out_dir. The final checkpoint path is
 * copied into checkpoint_path (NUL terminated, truncated to len) when given. */
HDNET_API hdnet_status hdnet_train(const char* config_path, const char* out_dir,
                                   char* checkpoint_path, size_t len);

HDNET_API hdnet_status hdnet_model_load(const char* checkpoint_path, hdnet_model** out);
HDNET_API void hdnet_model_free(hdnet_model* model);
HDNET_API size_t hdnet_model_parameter_count(const hdnet_model* model);

HDNET_API hdnet_status hdnet_image_load_png(const char* path, hdnet_image** out);
/* Loads a grayscale mask; bytes >= 128 are foreground. */
HDNET_API hdnet_status hdnet_mask_load_png(const char* path, hdnet_image** out);
HDNET_API hdnet_status hdnet_image_save_png(const hdnet_image* image, const char* path);
HDNET_API void hdnet_image_dims(const hdnet_image* image, size_t* channels, size_t* height,
                                size_t* width);
HDNET_API void hdnet_image_free(hdnet_image* image);

HDNET_API hdnet_status hdnet_harmonize(const hdnet_model* model, const hdnet_image* composite,
                                       const hdnet_image* mask, hdnet_image** out);

HDNET_API hdnet_status hdnet_evaluate(const hdnet_model* model, const char* manifest_path,
                                      hdnet_eval_report** out);
HDNET_API void hdnet_eval_report_harmonized(const hdnet_eval_report* report, hdnet_metrics* out);
HDNET_API void hdnet_eval_report_composite(const hdnet_eval_report* report, hdnet_metrics* out);
/* `metric=value` lines; the string lives as long as the report. */
HDNET_API const char* hdnet_eval_report_text(const hdnet_eval_report* report);
HDNET_API hdnet_status hdnet_eval_report_write(const hdnet_eval_report* report, const char* path);
HDNET_API void hdnet_eval_report_free(hdnet_eval_report* report);

/* Writes <seed>_<size>_<band>_{real,composite,mask}.png for every manifest
 * line into out_dir. */
HDNET_API hdnet_status hdnet_generate_dataset(const char* manifest_path, const char* out_dir);

/* One callback per suite. A failing suite leaves failures > 0 and the call
 * returns HDNET_ERR_SELFTEST. `detail` lists failing properties, one per line. */
typedef void (*hdnet_selftest_sink)(const char* suite, int passed, const char* summary,
                                    const char* detail, void* user);
HDNET_API hdnet_status hdnet_selftest(int quick, hdnet_selftest_sink sink, void* user,
                                      size_t* failures);

#ifdef __cplusplus
}
#endif

#endif
