/*
 * Region-of-interest markers for application profiling.
 *
 * Wrap the code to analyse with carm_roi_start() / carm_roi_end(). Select the
 * profiler at compile time:
 *   -DCARM_ROI_SDE        Intel SDE start/stop SSC marks (0x111 / 0x222)
 *   -DCARM_ROI_PAPI       PAPI high-level region "carm_roi" (link -lpapi)
 *   -DCARM_ROI_DYNAMORIO  carm_roi_dr_start/stop hooks wrapped by the opcode client
 *   (none)                timing only
 * Every mode prints "CARM_ROI_ELAPSED <seconds>" to stderr at carm_roi_end().
 */
#ifndef CARM_ROI_H_
#define CARM_ROI_H_

#include <stdio.h>
#include <time.h>

#if defined(CARM_ROI_PAPI)
#include <papi.h>
#endif

#ifdef __cplusplus
extern "C" {
#endif

static struct timespec carm_roi_t0_;

#if defined(CARM_ROI_DYNAMORIO)
__attribute__((noinline, used, weak)) void carm_roi_dr_start(void) { __asm__ volatile("" ::: "memory"); }
__attribute__((noinline, used, weak)) void carm_roi_dr_stop(void) { __asm__ volatile("" ::: "memory"); }
#endif

#if defined(CARM_ROI_SDE)
#if !defined(__x86_64__)
#error "CARM_ROI_SDE needs an x86-64 target"
#endif
#define CARM_ROI_SSC_MARK_(tag) \
  __asm__ volatile("movl %0, %%ebx\n\t.byte 0x64, 0x67, 0x90" ::"i"(tag) : "%ebx", "memory")
#endif

static inline void carm_roi_start(void) {
  clock_gettime(CLOCK_MONOTONIC, &carm_roi_t0_);
#if defined(CARM_ROI_SDE)
  CARM_ROI_SSC_MARK_(0x111);
#elif defined(CARM_ROI_PAPI)
  if (PAPI_hl_region_begin("carm_roi") != PAPI_OK) fprintf(stderr, "carm_roi: PAPI_hl_region_begin failed\n");
#elif defined(CARM_ROI_DYNAMORIO)
  carm_roi_dr_start();
#endif
}

static inline void carm_roi_end(void) {
#if defined(CARM_ROI_SDE)
  CARM_ROI_SSC_MARK_(0x222);
#elif defined(CARM_ROI_PAPI)
  if (PAPI_hl_region_end("carm_roi") != PAPI_OK) fprintf(stderr, "carm_roi: PAPI_hl_region_end failed\n");
#elif defined(CARM_ROI_DYNAMORIO)
  carm_roi_dr_stop();
#endif
  struct timespec t1;
  clock_gettime(CLOCK_MONOTONIC, &t1);
  double s = (double)(t1.tv_sec - carm_roi_t0_.tv_sec) + 1e-9 * (double)(t1.tv_nsec - carm_roi_t0_.tv_nsec);
  fprintf(stderr, "CARM_ROI_ELAPSED %.9f\n", s);
}

#ifdef __cplusplus
}
#endif

#endif /* CARM_ROI_H_ */
