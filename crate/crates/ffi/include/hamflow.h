#ifndef HAMFLOW_H
#define HAMFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HfStatus {
  HF_STATUS_OK = 0,
  HF_STATUS_NULL_POINTER = 1,
  HF_STATUS_INVALID_ARGUMENT = 2,
  HF_STATUS_NOT_REGULAR = 3,
  HF_STATUS_ESCAPED = 4,
  HF_STATUS_INTEGRATION_FAILED = 5,
  HF_STATUS_TRIVIAL_SPLITTING = 6,
  HF_STATUS_CERTIFICATE_VIOLATED = 7,
  HF_STATUS_FAILED = 8,
  HF_STATUS_PANICKED = 9,
} HfStatus;

/*
 Opaque Hamiltonian system.
 */
typedef struct HfSystem HfSystem;

/*
 Certificate of the bump perturbation `H = y3 - alpha l l~ phi`.
 */
typedef struct HfCertificate {
  double c0;
  double c1;
  double c2;
  double c_u;
  double rotation_error;
  double flow_state_error;
  /*
   Number of violated bounds; zero when the certificate holds.
   */
  uint32_t violations;
} HfCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Builds a system from a catalog id such as `"hyperbolic-drift"` or
 `"quadratic(1,1,1,1)"`. On success `*out` owns a new handle.

 # Safety
 `id` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HfStatus hf_system_new(const char *id, struct HfSystem **out);

/*
 Releases a handle from `hf_system_new`. Null is ignored.

 # Safety
 `sys` must come from `hf_system_new` and not be used afterwards.
 */
void hf_system_free(struct HfSystem *sys);

/*
 # Safety
 `y` points to 4 doubles, `out` to one.
 */
enum HfStatus hf_energy(const struct HfSystem *sys, const double *y, double *out);

/*
 `X_H(y) = J grad H(y)`.

 # Safety
 `y` and `out` point to 4 doubles each.
 */
enum HfStatus hf_vector_field(const struct HfSystem *sys, const double *y, double *out);

/*
 Time-`t` map from `y0` with step `dt`: the endpoint in `y_out` and the
 fundamental matrix in `f_out`. `f_out` may be null.

 # Safety
 `y0` and `y_out` point to 4 doubles, `f_out` to 16 or is null.
 */
enum HfStatus hf_integrate(const struct HfSystem *sys,
                           const double *y0,
                           double t,
                           double dt,
                           double *y_out,
                           double *f_out);

/*
 Upper Lyapunov exponent of the transversal cocycle over `[0, t]`.

 # Safety
 `y0` points to 4 doubles, `out` to one.
 */
enum HfStatus hf_upper_exponent(const struct HfSystem *sys,
                                const double *y0,
                                double t,
                                double dt,
                                double *out);

/*
 Certificate of the bump perturbation with amplitude `alpha`, radius `r`
 and inner fraction `nu`. Violated bounds are counted, not reported as errors.

 # Safety
 `out` must be a valid pointer.
 */
enum HfStatus hf_certify_bump(double alpha,
                              double r,
                              double nu,
                              double epsilon,
                              size_t grid,
                              struct HfCertificate *out);

/*
 Copies the calling thread's last error message into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length without the NUL.

 # Safety
 `buf` points to `len` writable bytes or is null.
 */
size_t hf_last_error(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HAMFLOW_H */
