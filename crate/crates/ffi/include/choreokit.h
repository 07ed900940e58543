#ifndef CHOREOKIT_H
#define CHOREOKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Keypoints per frame.
#define CK_NUM_JOINTS 18

// Result of every fallible call.
typedef enum CkStatus {
  CK_OK = 0,
  // A required pointer argument was null.
  CK_NULL_ARGUMENT = 1,
  // An argument was out of range or inconsistent.
  CK_INVALID_ARGUMENT = 2,
  CK_IO = 3,
  // A file could not be parsed or has the wrong version.
  CK_FORMAT = 4,
  // Nothing usable was left after cleaning.
  CK_NO_DATA = 5,
  CK_NUMERICAL = 6,
  CK_PANIC = 7,
} CkStatus;

// Opaque mono audio clip.
typedef struct CkAudio CkAudio;

// Opaque fragment database.
typedef struct CkDatabase CkDatabase;

// Opaque trained model.
typedef struct CkModel CkModel;

// Opaque pose sequence.
typedef struct CkSequence CkSequence;

// Opaque resolved settings.
typedef struct CkSettings CkSettings;

// Scores produced by [`ck_evaluate`].
typedef struct CkReport {
  double s_ba;
  double mdd_h;
  double mdd_f;
  double sdd_h;
  double sdd_f;
  double hand_hist[5];
  double foot_hist[5];
} CkReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none.
// The pointer stays valid until the next failing call on the same thread.
const char *ck_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ck_version(void);

// Load settings from a TOML file; a null path gives the defaults.
//
// # Safety
// `path` must be null or a NUL-terminated string; `out` must be writable.
enum CkStatus ck_settings_load(const char *path, struct CkSettings **out);

// # Safety
// `s` must be null or a handle from [`ck_settings_load`] not yet freed.
void ck_settings_free(struct CkSettings *s);

// Read a keypoint JSON file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CkStatus ck_sequence_load(const char *path, struct CkSequence **out);

// Write a keypoint JSON file.
//
// # Safety
// `seq` must be a live handle; `path` a NUL-terminated string.
enum CkStatus ck_sequence_save(const struct CkSequence *seq, const char *path);

// Number of frames, or 0 for a null handle.
//
// # Safety
// `seq` must be null or a live handle.
size_t ck_sequence_len(const struct CkSequence *seq);

// Frame rate, or 0 for a null handle.
//
// # Safety
// `seq` must be null or a live handle.
uint32_t ck_sequence_fps(const struct CkSequence *seq);

// Copy frame `frame` as `CK_NUM_JOINTS` triples `x, y, confidence` into `out`.
//
// # Safety
// `seq` must be a live handle; `out` must hold `3 * CK_NUM_JOINTS` doubles.
enum CkStatus ck_sequence_frame(const struct CkSequence *seq, size_t frame, double *out);

// # Safety
// `seq` must be null or a live handle.
void ck_sequence_free(struct CkSequence *seq);

// Read a WAV file, mixed to mono and resampled to the internal rate.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CkStatus ck_audio_load(const char *path, struct CkAudio **out);

// Duration in seconds, or 0 for a null handle.
//
// # Safety
// `audio` must be null or a live handle.
double ck_audio_duration(const struct CkAudio *audio);

// Beat frames at `fps`. Up to `cap` frames are written to `out`; the full
// count goes to `count`, so a call with `cap = 0` queries the size.
//
// # Safety
// `audio` must be a live handle; `out` must hold `cap` values or be null
// when `cap` is 0; `count` must be writable.
enum CkStatus ck_audio_beats(const struct CkAudio *audio,
                             uint32_t fps,
                             size_t *out,
                             size_t cap,
                             size_t *count);

// # Safety
// `audio` must be null or a live handle.
void ck_audio_free(struct CkAudio *audio);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CkStatus ck_database_load(const char *path, struct CkDatabase **out);

// Number of fragments, or 0 for a null handle.
//
// # Safety
// `db` must be null or a live handle.
size_t ck_database_len(const struct CkDatabase *db);

// # Safety
// `db` must be null or a live handle.
void ck_database_free(struct CkDatabase *db);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CkStatus ck_model_load(const char *path, struct CkModel **out);

// # Safety
// `model` must be null or a live handle.
void ck_model_free(struct CkModel *model);

// Retrieve one fragment per audio segment and align the result.
// `settings` may be null for the defaults; `skip_align` non-zero returns the
// plain concatenation.
//
// # Safety
// Handles must be live (`settings` may be null); `out` must be writable.
enum CkStatus ck_generate(const struct CkModel *model,
                          const struct CkDatabase *db,
                          const struct CkAudio *audio,
                          const struct CkSettings *settings,
                          int32_t skip_align,
                          struct CkSequence **out);

// Score `seq` against its audio, using every fragment of `reference` as
// reference motion.
//
// # Safety
// Handles must be live (`settings` may be null); `out` must be writable.
enum CkStatus ck_evaluate(const struct CkSequence *seq,
                          const struct CkAudio *audio,
                          const struct CkDatabase *reference,
                          const struct CkSettings *settings,
                          struct CkReport *out);

// Render numbered PNG frames and `manifest.json` into `dir`.
//
// # Safety
// `seq` must be a live handle; `dir` a NUL-terminated string.
enum CkStatus ck_render(const struct CkSequence *seq,
                        const char *dir,
                        uint32_t width,
                        uint32_t height);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHOREOKIT_H */
