#include <stdio.h>
#include <string.h>

#include "polcomp.h"

#define CHECK(call)                                                           \
  do {                                                                        \
    PolcompStatus s_ = (call);                                                \
    if (s_ != POLCOMP_STATUS_OK) {                                            \
      const char *m_ = polcomp_last_error();                                  \
      fprintf(stderr, "%s: %s (%s)\n", #call, polcomp_status_message(s_),     \
              m_ ? m_ : "");                                                  \
      return 1;                                                               \
    }                                                                         \
  } while (0)

int main(void) {
  double r = 0.0;
  CHECK(polcomp_shrink_radius(0.58, NULL, &r));

  PolcompStack *stack = NULL;
  CHECK(polcomp_stack_new_default(&stack));
  const double v[4] = {2.0, 3.0, 4.0, 5.0};
  PolcompUnitary u;
  CHECK(polcomp_stack_unitary(stack, v, &u));
  double back[4], fidelity = 0.0;
  CHECK(polcomp_stack_decompose(stack, &u, back, &fidelity));
  polcomp_stack_free(stack);

  PolcompSession *session = NULL;
  CHECK(polcomp_session_new(NULL, 3, &session));
  PolcompIteration it;
  for (int i = 0; i < 5; i++) CHECK(polcomp_session_step(session, &it));
  polcomp_session_free(session);

  if (polcomp_run_scenario("[run]\nr_min = 1\n", NULL, NULL) != POLCOMP_STATUS_CONFIG) return 2;

  printf("%s %.4f %.8f %llu %.4f\n", polcomp_version(), r, fidelity,
         (unsigned long long)it.iteration, it.best_qber);
  return 0;
}
